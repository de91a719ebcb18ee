"""Piecewise-constant two-tone laser controls.

The instantaneous field of segment j is

    eps(j) = Omega1(j) cos[(delta1 + Delta) t_j] + Omega2(j) cos[(delta2 + Delta) t_j]

with envelopes held constant over blocks of ``resolution / dt`` segments.
Envelopes and detunings are stored in rad/ns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * np.pi

#: Conversion factors from quoted "GHz" laser values to rad/ns.
CONVENTIONS = {"plain": 1.0, "angular": TWO_PI}
DEFAULT_CONVENTION = "plain"


def ghz_to_internal(x, convention: str = DEFAULT_CONVENTION):
    """Quoted laser value in GHz -> rad/ns. Arrays stay arrays, scalars become floats."""
    scale = CONVENTIONS[convention]
    return np.asarray(x, dtype=float) * scale if np.ndim(x) else float(x) * scale


def internal_to_ghz(x, convention: str = DEFAULT_CONVENTION):
    scale = CONVENTIONS[convention]
    return np.asarray(x, dtype=float) / scale if np.ndim(x) else float(x) / scale


def _as_segments(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T = {T} is not an integer multiple of dt = {dt}")
    return n


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ControlField:
    """Two envelopes sampled per segment plus carrier and global detunings.

    ``sampling`` selects where inside a segment the carriers are evaluated:
    ``"midpoint"`` (t_j = (j - 1/2) dt) or ``"left"`` (t_j = (j - 1) dt).
    """

    omega1: np.ndarray
    omega2: np.ndarray
    delta1: float
    delta2: float
    Delta: float = 0.0
    dt: float = 0.005
    resolution: float | None = None
    sampling: str = "midpoint"

    def __post_init__(self):
        o1, o2 = _readonly(self.omega1), _readonly(self.omega2)
        if o1.ndim != 1 or o1.shape != o2.shape or o1.size == 0:
            raise ValueError("envelopes must be equal-length non-empty 1-D arrays")
        if not (np.all(np.isfinite(o1)) and np.all(np.isfinite(o2))):
            raise ValueError("envelopes must be finite")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.sampling not in ("midpoint", "left"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        res = self.dt if self.resolution is None else float(self.resolution)
        n = int(round(res / self.dt))
        if n < 1 or abs(n * self.dt - res) > 1e-9 * res:
            raise ValueError(f"resolution {res} is not a multiple of dt = {self.dt}")
        if o1.size % n:
            raise ValueError(f"{o1.size} segments cannot be split into blocks of {n}")
        for env in (o1, o2):
            blocks = env.reshape(-1, n)
            if np.any(blocks != blocks[:, :1]):
                raise ValueError("envelope is not constant within resolution blocks")
        object.__setattr__(self, "omega1", o1)
        object.__setattr__(self, "omega2", o2)
        object.__setattr__(self, "resolution", res)

    @property
    def n_segments(self) -> int:
        return self.omega1.size

    @property
    def T(self) -> float:
        return self.n_segments * self.dt

    @property
    def block_length(self) -> int:
        """Segments per envelope block."""
        return int(round(self.resolution / self.dt))

    @property
    def n_blocks(self) -> int:
        return self.n_segments // self.block_length

    @property
    def times(self) -> np.ndarray:
        """Carrier sampling times t_j, j = 1..N."""
        offset = 0.5 if self.sampling == "midpoint" else 0.0
        return (np.arange(self.n_segments) + offset) * self.dt

    def phases(self) -> tuple[np.ndarray, np.ndarray]:
        t = self.times
        return (self.delta1 + self.Delta) * t, (self.delta2 + self.Delta) * t

    def eps_series(self) -> np.ndarray:
        p1, p2 = self.phases()
        return self.omega1 * np.cos(p1) + self.omega2 * np.cos(p2)

    def blocks(self) -> tuple[np.ndarray, np.ndarray]:
        """Envelope value of each block."""
        n = self.block_length
        return self.omega1[::n].copy(), self.omega2[::n].copy()

    def with_blocks(self, b1, b2, Delta: float | None = None) -> "ControlField":
        n = self.block_length
        return replace(
            self,
            omega1=np.repeat(np.asarray(b1, dtype=float), n),
            omega2=np.repeat(np.asarray(b2, dtype=float), n),
            Delta=self.Delta if Delta is None else float(Delta),
        )

    def energy(self) -> float:
        return float(np.sum(self.omega1**2) + np.sum(self.omega2**2))

    def max_amplitude(self) -> float:
        return float(max(np.abs(self.omega1).max(), np.abs(self.omega2).max()))

    def to_dict(self, convention: str = DEFAULT_CONVENTION) -> dict:
        """Pulse-file representation, laser quantities in quoted GHz."""
        return {
            "T_ns": self.T,
            "dt_ns": self.dt,
            "resolution_ns": self.resolution,
            "Delta_GHz": internal_to_ghz(self.Delta, convention),
            "delta1_GHz": internal_to_ghz(self.delta1, convention),
            "delta2_GHz": internal_to_ghz(self.delta2, convention),
            "sampling": self.sampling,
            "convention": convention,
            "omega1_GHz": internal_to_ghz(self.omega1, convention).tolist(),
            "omega2_GHz": internal_to_ghz(self.omega2, convention).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControlField":
        conv = d.get("convention", DEFAULT_CONVENTION)
        if conv not in CONVENTIONS:
            raise ValueError(f"unknown convention {conv!r}")
        f = cls(
            omega1=ghz_to_internal(np.asarray(d["omega1_GHz"], dtype=float), conv),
            omega2=ghz_to_internal(np.asarray(d["omega2_GHz"], dtype=float), conv),
            delta1=ghz_to_internal(d.get("delta1_GHz", 0.0), conv),
            delta2=ghz_to_internal(d.get("delta2_GHz", 0.0), conv),
            Delta=ghz_to_internal(d.get("Delta_GHz", 0.0), conv),
            dt=float(d["dt_ns"]),
            resolution=d.get("resolution_ns"),
            sampling=d.get("sampling", "midpoint"),
        )
        if "T_ns" in d and abs(f.T - float(d["T_ns"])) > 1e-9:
            raise ValueError(f"T_ns = {d['T_ns']} disagrees with {f.n_segments} segments of {f.dt} ns")
        return f


@dataclass(frozen=True)
class GaussianParams:
    """Peak amplitude ``a`` (rad/ns), peak times and width (ns)."""

    a: float
    mu_plus: float
    mu_minus: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def default(cls, a: float, T: float) -> "GaussianParams":
        """sigma = T/10 with peaks at T/2 +- sigma."""
        s = T / 10
        return cls(a, T / 2 + s, T / 2 - s, s)

    @classmethod
    def symmetric(cls, a: float, mu: float, sigma: float, T: float) -> "GaussianParams":
        """Omega1 peaking at ``mu`` and Omega2 mirrored at ``T - mu``."""
        return cls(a, mu, T - mu, sigma)


def gaussian_stirap(
    p: GaussianParams,
    T: float,
    dt: float = 0.005,
    carriers: tuple[float, float] = (0.0, 0.0),
    Delta: float = 0.0,
    resolution: float | None = None,
    sampling: str = "midpoint",
) -> ControlField:
    """Gaussian envelope pair sampled at segment midpoints.

    Omega1 peaks at ``mu_plus`` and Omega2 at ``mu_minus``; for |-1> -> |+1>
    transfer Omega2 must come first. A coarser ``resolution`` holds the
    block average.
    """
    if not 0 <= p.mu_plus <= T or not 0 <= p.mu_minus <= T:
        raise ValueError("Gaussian peaks must lie inside [0, T]")
    N = _as_segments(T, dt)
    t = (np.arange(N) + 0.5) * dt
    o1 = p.a * np.exp(-((t - p.mu_plus) ** 2) / (2 * p.sigma**2))
    o2 = p.a * np.exp(-((t - p.mu_minus) ** 2) / (2 * p.sigma**2))
    f = ControlField(o1, o2, carriers[0], carriers[1], Delta, dt, sampling=sampling)
    return f if resolution is None else rebin(f, resolution)


def constant_field(
    a1: float,
    a2: float,
    T: float,
    dt: float = 0.005,
    carriers: tuple[float, float] = (0.0, 0.0),
    Delta: float = 0.0,
    resolution: float | None = None,
) -> ControlField:
    N = _as_segments(T, dt)
    return ControlField(np.full(N, float(a1)), np.full(N, float(a2)), carriers[0], carriers[1],
                        Delta, dt, resolution)


def sample_eps(field: ControlField, j: int) -> float:
    """Field value of segment ``j`` (1-based)."""
    if not 1 <= j <= field.n_segments:
        raise IndexError(f"segment {j} outside 1..{field.n_segments}")
    return float(field.eps_series()[j - 1])


def deps_domega(field: ControlField) -> tuple[np.ndarray, np.ndarray]:
    """d eps(j) / d Omega_i(j) for both tones."""
    p1, p2 = field.phases()
    return np.cos(p1), np.cos(p2)


def deps_dDelta(field: ControlField) -> np.ndarray:
    p1, p2 = field.phases()
    t = field.times
    return -field.omega1 * np.sin(p1) * t - field.omega2 * np.sin(p2) * t


def perturb(field: ControlField, dOmega: float, dDelta: float) -> ControlField:
    """Common-mode relative amplitude error and global detuning offset."""
    if 1 + dOmega < 0:
        raise ValueError("relative amplitude error below -1")
    return replace(
        field,
        omega1=field.omega1 * (1 + dOmega),
        omega2=field.omega2 * (1 + dOmega),
        Delta=field.Delta + dDelta,
    )


def rebin(field: ControlField, resolution: float) -> ControlField:
    """Average envelopes over blocks of ``resolution`` and hold them."""
    n = int(round(resolution / field.dt))
    if n < 1 or abs(n * field.dt - resolution) > 1e-9 * resolution:
        raise ValueError(f"resolution {resolution} is not a multiple of dt = {field.dt}")
    if field.n_segments % n:
        raise ValueError(f"{field.n_segments} segments cannot be split into blocks of {n}")
    if n == 1:
        return replace(field, resolution=field.dt)
    b1, b2 = _block_means(field.omega1, n), _block_means(field.omega2, n)
    return replace(field, omega1=np.repeat(b1, n), omega2=np.repeat(b2, n), resolution=n * field.dt)


def _block_means(x: np.ndarray, n: int) -> np.ndarray:
    blocks = x.reshape(-1, n)
    # constant blocks are kept bit-exact so rebinning is idempotent
    flat = np.all(blocks == blocks[:, :1], axis=1)
    return np.where(flat, blocks[:, 0], blocks.mean(axis=1))
