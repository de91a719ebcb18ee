"""Gradient ascent over piecewise-constant envelopes (GRAPE).

The figure of merit is

    phi = p3 + lam * p4bar + lam_E * E

with p3 the final |+1> population, p4bar the A2 population averaged over
the N segment endpoints and E = sum_j Omega1(j)^2 + Omega2(j)^2.

Propagator derivatives use the first-order form
d exp(L dt)/du ~ dt (dL/du) exp(L dt). The products over later segments
are never formed: one backward sweep carries two costates, one for the
final population and one for the running average (the "stairway" sum).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .liouville import EXPM_TOL, LiouvillianSplit, assemble_split, sweep_real, vectorize
from .model import Level, NvModel
from .pulses import DEFAULT_CONVENTION, ControlField, deps_dDelta, deps_domega, internal_to_ghz

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TargetWeights:
    lam: float = 0.0
    lam_E: float = 0.0

    def __post_init__(self):
        if self.lam > 0 or self.lam_E > 0:
            raise ValueError("penalty weights must be <= 0")


@dataclass(frozen=True)
class GrapeConfig:
    """Gradient-ascent settings.

    ``step_eps`` is the initial step; ``None`` picks it so that the first
    update changes no envelope block by more than ``initial_change`` rad/ns.
    The detuning moves ``detuning_scale`` times faster than an envelope
    block for the same gradient component.
    """

    step_eps: float | None = None
    initial_change: float = 0.5
    max_iters: int = 2000
    convergence_window: int = 100
    convergence_tol: float = 1e-3
    optimize_detuning: bool = False
    amplitude_cap: float = 12.0
    nonnegative: bool = False
    detuning_scale: float = 1e-3
    step_growth: float = 1.2
    step_shrink: float = 0.5
    step_floor: float = 1e-12
    rng_seed: int = 0

    def __post_init__(self):
        if self.step_eps is not None and not self.step_eps > 0:
            raise ValueError("step_eps must be positive")
        if not (self.convergence_tol > 0 and self.convergence_window > 0):
            raise ValueError("convergence window and tolerance must be positive")
        if not self.amplitude_cap > 0:
            raise ValueError("amplitude_cap must be positive")


@dataclass
class GradientBundle:
    dphi_dOmega1: np.ndarray
    dphi_dOmega2: np.ndarray
    dphi_dDelta: float = 0.0

    def __add__(self, other: "GradientBundle") -> "GradientBundle":
        return GradientBundle(
            self.dphi_dOmega1 + other.dphi_dOmega1,
            self.dphi_dOmega2 + other.dphi_dOmega2,
            self.dphi_dDelta + other.dphi_dDelta,
        )

    def __mul__(self, c: float) -> "GradientBundle":
        return GradientBundle(c * self.dphi_dOmega1, c * self.dphi_dOmega2, c * self.dphi_dDelta)

    __rmul__ = __mul__


class PhiValue(NamedTuple):
    phi: float
    p3: float
    p4bar: float
    E: float


@dataclass
class OptimizationRun:
    """Outcome of one optimization from one starting point."""

    method: str
    seed: int | None
    field: ControlField
    p3: float
    p4bar: float
    E: float
    phi_history: list[float]
    iters: int
    wall_time_s: float = 0.0
    stop_reason: str = ""
    start: dict = field(default_factory=dict)

    @property
    def max_amplitude(self) -> float:
        return self.field.max_amplitude()

    def to_record(self, convention: str = DEFAULT_CONVENTION) -> dict:
        return {
            "seed": self.seed,
            "method": self.method,
            "phi_history": [float(x) for x in self.phi_history],
            "best_pulse": self.field.to_dict(convention),
            "p3": self.p3,
            "p4bar": self.p4bar,
            "E": self.E,
            "iters": self.iters,
            "wall_time_s": self.wall_time_s,
            "stop_reason": self.stop_reason,
            "max_amplitude_GHz": internal_to_ghz(self.max_amplitude, convention),
            "start": self.start,
        }


def _rho0_vec(model: NvModel, rho0) -> np.ndarray:
    if isinstance(rho0, (Level, int)):
        rho0 = model.basis_state(rho0)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.dims, model.dims):
        raise ValueError(f"initial state has shape {rho0.shape}, model has {model.dims} levels")
    return vectorize(rho0)


def _indicator(model: NvModel, level: Level) -> np.ndarray:
    """Population functional in real coordinates, where populations come first."""
    c = np.zeros(model.dims**2)
    c[model.index(level)] = 1.0
    return c


def _values(model: NvModel, field: ControlField, states: np.ndarray, w: TargetWeights) -> PhiValue:
    # states are real coordinates: the first n entries are the populations
    p3 = float(states[-1, model.index(Level.PLUS1)])
    p4bar = float(states[1:, model.index(Level.A2)].mean())
    E = field.energy()
    return PhiValue(p3 + w.lam * p4bar + w.lam_E * E, p3, p4bar, E)


def eval_phi(
    model: NvModel,
    field: ControlField,
    rho0=Level.MINUS1,
    w: TargetWeights = TargetWeights(),
    split: LiouvillianSplit | None = None,
) -> PhiValue:
    split = split or assemble_split(model)
    states = sweep_real(split, field.eps_series(), field.dt, split.to_real(_rho0_vec(model, rho0)))
    return _values(model, field, states, w)


class Sweeps(NamedTuple):
    """Forward states and the per-segment costate contractions.

    ``states`` holds the real coordinates (``LiouvillianSplit.to_real``) of
    the N+1 states.

    ``s_final[j-1]`` is c^T U_back(j) Leps rho_j for the final-population
    functional c, ``s_stair[j-1]`` the same with U_stair(j) and the A2
    projector.
    """

    states: np.ndarray
    s_final: np.ndarray
    s_stair: np.ndarray


def forward_backward_states(
    model: NvModel,
    field: ControlField,
    rho0=Level.MINUS1,
    split: LiouvillianSplit | None = None,
    states: np.ndarray | None = None,
    stair: bool = True,
) -> Sweeps:
    split = split or assemble_split(model)
    eps = np.ascontiguousarray(field.eps_series())
    if states is None:
        states = sweep_real(split, eps, field.dt, split.to_real(_rho0_vec(model, rho0)))
    ip, ix, d0, d1, n0, n1 = split._adj
    lp, lx, ld = split._le
    s_final, s_stair = _kernels.adjoint_sweep(
        ip, ix, d0, d1, eps, float(field.dt), n0, n1, lp, lx, ld,
        states,
        _indicator(model, Level.PLUS1),
        _indicator(model, Level.A2),
        stair,
        EXPM_TOL,
    )
    return Sweeps(states, s_final, s_stair)


def _assemble(field: ControlField, seg: np.ndarray) -> GradientBundle:
    """Chain a per-segment sensitivity d phi / d eps(j) to the block parameters."""
    c1, c2 = deps_domega(field)
    n = field.block_length
    return GradientBundle(
        (seg * c1).reshape(-1, n).sum(axis=1),
        (seg * c2).reshape(-1, n).sum(axis=1),
        float(np.sum(seg * deps_dDelta(field))),
    )


def grad_p3(model, field, rho0=Level.MINUS1, split=None, sweeps: Sweeps | None = None) -> GradientBundle:
    sweeps = sweeps or forward_backward_states(model, field, rho0, split)
    return _assemble(field, field.dt * sweeps.s_final)


def grad_p4bar(model, field, rho0=Level.MINUS1, split=None, sweeps: Sweeps | None = None) -> GradientBundle:
    sweeps = sweeps or forward_backward_states(model, field, rho0, split)
    N = field.n_segments
    return _assemble(field, field.dt / N * sweeps.s_stair)


def grad_energy(field: ControlField) -> GradientBundle:
    n = field.block_length
    b1, b2 = field.blocks()
    return GradientBundle(2 * n * b1, 2 * n * b2, 0.0)


def grad_phi(model, field, rho0=Level.MINUS1, w: TargetWeights = TargetWeights(), split=None,
             sweeps: Sweeps | None = None) -> GradientBundle:
    sweeps = sweeps or forward_backward_states(model, field, rho0, split)
    g = grad_p3(model, field, sweeps=sweeps)
    if w.lam:
        g = g + w.lam * grad_p4bar(model, field, sweeps=sweeps)
    if w.lam_E:
        g = g + w.lam_E * grad_energy(field)
    return g


class _Problem:
    """Maps a flat parameter vector to fields, values and gradients."""

    def __init__(self, model, field0, rho0, w, cfg, split):
        self.model, self.w, self.cfg = model, w, cfg
        self.split = split or assemble_split(model)
        self.rho0 = self.split.to_real(_rho0_vec(model, rho0))
        self.template = field0
        self.nb = field0.n_blocks

    def pack(self, f: ControlField) -> np.ndarray:
        b1, b2 = f.blocks()
        x = [b1, b2]
        if self.cfg.optimize_detuning:
            x.append([f.Delta])
        return np.concatenate(x)

    def unpack(self, x: np.ndarray) -> ControlField:
        nb = self.nb
        Delta = float(x[2 * nb]) if self.cfg.optimize_detuning else None
        return self.template.with_blocks(x[:nb], x[nb:2 * nb], Delta)

    def clip(self, x: np.ndarray) -> np.ndarray:
        x = x.copy()
        lo = 0.0 if self.cfg.nonnegative else -self.cfg.amplitude_cap
        x[: 2 * self.nb] = np.clip(x[: 2 * self.nb], lo, self.cfg.amplitude_cap)
        return x

    def scale(self) -> np.ndarray:
        s = np.ones(2 * self.nb + int(self.cfg.optimize_detuning))
        if self.cfg.optimize_detuning:
            s[-1] = self.cfg.detuning_scale
        return s

    def evaluate(self, x):
        f = self.unpack(x)
        states = sweep_real(self.split, f.eps_series(), f.dt, self.rho0)
        value = _values(self.model, f, states, self.w)
        if not np.isfinite(value.phi):
            raise FloatingPointError(
                f"non-finite figure of merit (p3={value.p3}, p4bar={value.p4bar}, E={value.E}); "
                f"max |Omega| = {np.abs(x[:2 * self.nb]).max():.4g}"
            )
        return f, states, value

    def gradient(self, f, states) -> np.ndarray:
        sw = forward_backward_states(self.model, f, split=self.split, states=states, stair=bool(self.w.lam))
        g = grad_phi(self.model, f, w=self.w, sweeps=sw)
        parts = [g.dphi_dOmega1, g.dphi_dOmega2]
        if self.cfg.optimize_detuning:
            parts.append([g.dphi_dDelta])
        return np.concatenate(parts)


def grape_optimize(
    model: NvModel,
    field0: ControlField,
    rho0=Level.MINUS1,
    w: TargetWeights = TargetWeights(),
    cfg: GrapeConfig = GrapeConfig(),
    split: LiouvillianSplit | None = None,
    method: str = "grape",
    seed: int | None = None,
) -> OptimizationRun:
    """Backtracking gradient ascent from ``field0``.

    A trial step is accepted only if phi increases; the step then grows by
    ``step_growth``, otherwise it is cut by ``step_shrink`` and retried.
    Stops once phi gained less than ``convergence_tol`` over the last
    ``convergence_window`` accepted iterations, when the step falls below
    ``step_floor`` or after ``max_iters``.
    """
    t0 = time.perf_counter()
    prob = _Problem(model, field0, rho0, w, cfg, split)
    scale = prob.scale()
    x = prob.clip(prob.pack(field0))
    f, states, value = prob.evaluate(x)
    history = [value.phi]
    g = prob.gradient(f, states) * scale
    step = cfg.step_eps
    if step is None:
        gmax = np.abs(g[: 2 * prob.nb]).max()
        step = cfg.initial_change / gmax if gmax > 0 else 1.0
    reason = "max_iters"
    it = 0
    while it < cfg.max_iters:
        while True:
            x_new = prob.clip(x + step * g)
            f_new, states_new, value_new = prob.evaluate(x_new)
            if value_new.phi > value.phi:
                break
            step *= cfg.step_shrink
            if step < cfg.step_floor:
                break
        if step < cfg.step_floor:
            reason = "step_floor"
            break
        x, f, states, value = x_new, f_new, states_new, value_new
        step *= cfg.step_growth
        it += 1
        history.append(value.phi)
        W = cfg.convergence_window
        if len(history) > W and history[-1] - history[-1 - W] < cfg.convergence_tol:
            reason = "converged"
            break
        g = prob.gradient(f, states) * scale
    log.debug("%s seed=%s stopped (%s) after %d iterations, phi=%.6f", method, seed, reason, it, value.phi)
    return OptimizationRun(
        method=method,
        seed=seed,
        field=f,
        p3=value.p3,
        p4bar=value.p4bar,
        E=value.E,
        phi_history=history,
        iters=it,
        wall_time_s=time.perf_counter() - t0,
        stop_reason=reason,
    )
