"""Level structure, Hamiltonians and decay channels of the NV center.

All frequencies are angular and expressed in rad/ns, so a splitting quoted
as ``(2pi) 2.88 GHz`` is stored as ``2 * pi * 2.88``. Decay rates are in 1/ns.

Levels are numbered 1..10 in Hamiltonian order::

    1 |-1>   2 |0>   3 |+1>   4 A2   5 A1   6 EX   7 EY   8 E1   9 E2   10 |10>

The metastable singlets are lumped into level 10.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.constants import physical_constants

TWO_PI = 2.0 * np.pi

#: Bohr magneton over Planck's constant in GHz/G.
MU_B_GHZ_PER_GAUSS = physical_constants["Bohr magneton in Hz/T"][0] * 1e-13


class Level(IntEnum):
    """One-based level index with its spectroscopic label."""

    MINUS1 = 1
    ZERO = 2
    PLUS1 = 3
    A2 = 4
    A1 = 5
    EX = 6
    EY = 7
    E1 = 8
    E2 = 9
    META = 10

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def pos(self) -> int:
        """Zero-based row in the 10-level matrices."""
        return int(self) - 1

    @classmethod
    def from_label(cls, label: str) -> "Level":
        for lvl, lab in _LABELS.items():
            if lab == label:
                return lvl
        raise KeyError(f"unknown level label {label!r}")


_LABELS = {
    Level.MINUS1: "|-1>",
    Level.ZERO: "|0>",
    Level.PLUS1: "|+1>",
    Level.A2: "A2",
    Level.A1: "A1",
    Level.EX: "EX",
    Level.EY: "EY",
    Level.E1: "E1",
    Level.E2: "E2",
    Level.META: "|10>",
}

GROUND = (Level.MINUS1, Level.ZERO, Level.PLUS1)
EXCITED = (Level.A2, Level.A1, Level.EX, Level.EY, Level.E1, Level.E2)

#: Level subsets of the supported models, in matrix order.
MODEL_LEVELS = {
    10: tuple(Level),
    4: (Level.MINUS1, Level.ZERO, Level.PLUS1, Level.A2),
    3: (Level.MINUS1, Level.A2, Level.PLUS1),
}


@dataclass(frozen=True)
class PhysicalConstants:
    """Zero-field splittings and couplings, angular frequencies in rad/ns.

    ``muB_B`` is the bare Bohr-magneton energy of the axial field; the Zeeman
    shift of each manifold is its g-factor times this value. The default
    corresponds to B = 200 G.
    """

    D_gs: float = TWO_PI * 2.88
    g_gs: float = 2.01
    D_es: float = TWO_PI * 1.42
    Delta_ss: float = TWO_PI * 1.55
    Delta_pp: float = TWO_PI * 0.2
    l_z: float = TWO_PI * 5.3
    g_es: float = 2.01
    E_g_eV: float = 1.94
    muB_B: float = TWO_PI * MU_B_GHZ_PER_GAUSS * 200.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value}")
            if f.name != "muB_B" and value < 0:
                raise ValueError(f"{f.name} must be non-negative, got {value}")

    @property
    def zeeman_gs(self) -> float:
        return self.g_gs * self.muB_B

    @property
    def zeeman_es(self) -> float:
        return self.g_es * self.muB_B

    @classmethod
    def with_field_gauss(cls, B: float, **overrides) -> "PhysicalConstants":
        return cls(muB_B=TWO_PI * MU_B_GHZ_PER_GAUSS * B, **overrides)

    @classmethod
    def with_zeeman(cls, ghz: float, **overrides) -> "PhysicalConstants":
        """Constants whose ground-state Zeeman shift g*muB*B equals 2pi*ghz."""
        g = overrides.get("g_gs", cls.g_gs)
        return cls(muB_B=TWO_PI * ghz / g, **overrides)

    @property
    def field_gauss(self) -> float:
        return self.muB_B / (TWO_PI * MU_B_GHZ_PER_GAUSS)


def build_ground_hamiltonian(c: PhysicalConstants) -> np.ndarray:
    """Ground triplet in the basis (|-1>, |0>, |+1>)."""
    z = c.zeeman_gs
    return np.diag([c.D_gs - z, 0.0, c.D_gs + z]).astype(complex)


def build_excited_hamiltonian(c: PhysicalConstants) -> np.ndarray:
    """Excited sextet in the basis (A2, A1, EX, EY, E1, E2).

    The optical gap is left out: it is removed by the interaction picture.
    """
    z = c.zeeman_es
    h = np.zeros((6, 6), dtype=complex)
    h[0, 0] = c.Delta_ss + 2 * c.l_z
    h[1, 1] = -c.Delta_ss + 2 * c.l_z
    h[0, 1] = h[1, 0] = z
    e = -c.D_es + c.l_z
    d = c.Delta_pp
    h[2:, 2:] = [
        [e, 0, 0, d],
        [0, e, 1j * d, 0],
        [0, -1j * d, 0, -z],
        [d, 0, -z, 0],
    ]
    return h


def build_dipole_pattern() -> np.ndarray:
    """Optical coupling per unit field, linear polarization along x."""
    v = np.array(
        [
            [1j, -1j, 0, 0, -1j, -1j],
            [0, 0, 0, 2, 0, 0],
            [-1j, -1j, 0, 0, 1j, -1j],
        ],
        dtype=complex,
    )
    V = np.zeros((10, 10), dtype=complex)
    V[0:3, 3:9] = v
    V[3:9, 0:3] = v.conj().T
    return V


_DECAY_TABLE: dict[tuple[Level, Level], float] = {}
for _k in (Level.A2, Level.A1, Level.E1, Level.E2):
    _DECAY_TABLE[_k, Level.PLUS1] = 1 / 24
    _DECAY_TABLE[_k, Level.MINUS1] = 1 / 31
    _DECAY_TABLE[_k, Level.ZERO] = 1 / 104
    _DECAY_TABLE[_k, Level.META] = 1 / 33
for _k in (Level.EX, Level.EY):
    _DECAY_TABLE[_k, Level.ZERO] = 1 / 13
    _DECAY_TABLE[_k, Level.PLUS1] = 1 / 666
    _DECAY_TABLE[_k, Level.MINUS1] = 1 / 666
_DECAY_TABLE[Level.META, Level.ZERO] = 1 / 303


def decay_rate(src: Level | int, dst: Level | int) -> float:
    """Spontaneous decay rate src -> dst in 1/ns; zero for neglected channels."""
    return _DECAY_TABLE.get((Level(src), Level(dst)), 0.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Jump:
    src: Level
    dst: Level
    rate: float


@dataclass(frozen=True, eq=False)
class NvModel:
    """Interaction-picture NV model restricted to ``levels``.

    ``H_static`` is the drift Hamiltonian, ``V_pattern`` the coupling that
    multiplies the instantaneous field and ``jumps`` the decay channels.
    """

    H_static: np.ndarray
    V_pattern: np.ndarray
    jumps: tuple[Jump, ...]
    levels: tuple[Level, ...]
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    dissipation: bool = True

    @property
    def dims(self) -> int:
        return len(self.levels)

    def index(self, level: Level | int) -> int:
        """Zero-based position of ``level`` inside this model."""
        try:
            return self.levels.index(Level(level))
        except ValueError:
            raise KeyError(f"{Level(level).label} is not part of the {self.dims}-level model")

    @property
    def omega_a(self) -> float:
        return self.H_static[self.index(Level.A2), self.index(Level.A2)].real

    @property
    def omega_b(self) -> float:
        return self.H_static[self.index(Level.MINUS1), self.index(Level.MINUS1)].real

    @property
    def omega_c(self) -> float:
        return self.H_static[self.index(Level.PLUS1), self.index(Level.PLUS1)].real

    @property
    def delta1(self) -> float:
        """Carrier detuning resonant with |-1> <-> A2."""
        return self.omega_a - self.omega_b

    @property
    def delta2(self) -> float:
        """Carrier detuning resonant with |+1> <-> A2."""
        return self.omega_a - self.omega_c

    @property
    def carriers(self) -> tuple[float, float]:
        return self.delta1, self.delta2

    def jump_operators(self) -> list[tuple[np.ndarray, float]]:
        """(O, rate) pairs with O = |dst><src| in this model's basis."""
        ops = []
        for j in self.jumps:
            O = np.zeros((self.dims, self.dims))
            O[self.index(j.dst), self.index(j.src)] = 1.0
            ops.append((O, j.rate))
        return ops

    def basis_state(self, level: Level | int) -> np.ndarray:
        rho = np.zeros((self.dims, self.dims), dtype=complex)
        k = self.index(level)
        rho[k, k] = 1.0
        return rho


def full_static_hamiltonian(c: PhysicalConstants) -> np.ndarray:
    H = np.zeros((10, 10), dtype=complex)
    H[0:3, 0:3] = build_ground_hamiltonian(c)
    H[3:9, 3:9] = build_excited_hamiltonian(c)
    # level 10 carries no coherent coupling; its energy is irrelevant
    return H


def build_interaction_model(
    c: PhysicalConstants | None = None,
    dims: int = 10,
    dissipation: bool = True,
) -> NvModel:
    """Assemble the 10-, 4- or 3-level model.

    The 4-level model keeps only the A2 decays into the ground triplet, the
    3-level Lambda system (|-1>, A2, |+1>) is closed.
    """
    if dims not in MODEL_LEVELS:
        raise ValueError(f"dims must be one of {sorted(MODEL_LEVELS)}, got {dims!r}")
    c = c or PhysicalConstants()
    levels = MODEL_LEVELS[dims]
    idx = [lvl.pos for lvl in levels]
    H = full_static_hamiltonian(c)[np.ix_(idx, idx)]
    V = build_dipole_pattern()[np.ix_(idx, idx)]

    jumps: list[Jump] = []
    if dissipation and dims == 10:
        jumps = [Jump(s, d, r) for (s, d), r in _DECAY_TABLE.items()]
    elif dissipation and dims == 4:
        jumps = [
            Jump(s, d, r) for (s, d), r in _DECAY_TABLE.items() if s is Level.A2 and d in levels
        ]
    return NvModel(
        H_static=_frozen(H),
        V_pattern=_frozen(V),
        jumps=tuple(jumps),
        levels=levels,
        constants=c,
        dissipation=dissipation,
    )
