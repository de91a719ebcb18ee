"""Box-constrained Nelder-Mead over the Gaussian STIRAP parameters.

Trial points outside the box are clipped back onto it. The search
maximizes; non-finite objective values rank as -inf.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grape import OptimizationRun, TargetWeights, eval_phi
from .liouville import LiouvillianSplit, assemble_split
from .model import Level, NvModel
from .pulses import GaussianParams, gaussian_stirap


@dataclass(frozen=True)
class SimplexConfig:
    """Nelder-Mead coefficients and stopping rules.

    The search stops after ``max_evals`` objective calls or once the spread
    of values across the simplex falls below ``stall_tol``.
    """

    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_evals: int = 300
    stall_tol: float = 1e-6
    initial_fraction: float = 0.05

    def __post_init__(self):
        if not (self.reflection > 0 and self.expansion > 1 and 0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise ValueError("invalid Nelder-Mead coefficients")
        if self.max_evals < 1 or not self.stall_tol > 0:
            raise ValueError("max_evals and stall_tol must be positive")


def gaussian_bounds(T: float, a_max: float = 3.0) -> np.ndarray:
    """Start box for (a, mu, sigma): a in [0, a_max], mu in [T/4, 3T/4], sigma in [T/20, 3T/20]."""
    return np.array([[0.0, a_max], [T / 4, 3 * T / 4], [T / 20, 3 * T / 20]])


def search_bounds(T: float, amplitude_cap: float = 12.0) -> np.ndarray:
    """Box the simplex is clipped to: a in [0, cap], mu in [0, T], sigma in [T/100, T/2].

    Random starts come from ``gaussian_bounds``; the search itself may leave
    that box, as the optimal short pulses are far stronger than 3 rad/ns.
    """
    return np.array([[0.0, amplitude_cap], [0.0, T], [T / 100, T / 2]])


@dataclass
class SimplexResult:
    x: np.ndarray
    value: float
    history: list[float]
    n_evals: int
    stop_reason: str


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    start,
    bounds,
    cfg: SimplexConfig = SimplexConfig(),
) -> SimplexResult:
    """Maximize ``objective`` inside the box ``bounds`` (shape (d, 2)).

    ``history`` holds the best value after every iteration and never
    decreases.
    """
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    x0 = np.asarray(start, dtype=float)
    if x0.shape != lo.shape or np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError(f"start {x0} outside the box {bounds.tolist()}")
    d = x0.size
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        v = objective(x)
        return float(v) if math.isfinite(v) else -math.inf

    # step inward from the upper face so every vertex is distinct
    width = hi - lo
    simplex = [x0]
    for i in range(d):
        v = x0.copy()
        step = cfg.initial_fraction * width[i]
        v[i] = v[i] + step if v[i] + step <= hi[i] else v[i] - step
        simplex.append(v)
    simplex = np.array(simplex)
    values = np.array([f(v) for v in simplex])
    history = [float(values.max())]
    reason = "max_evals"

    while evals < cfg.max_evals:
        order = np.argsort(-values, kind="stable")
        simplex, values = simplex[order], values[order]
        if values[0] - values[-1] < cfg.stall_tol and np.all(np.isfinite(values)):
            reason = "converged"
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]

        xr = np.clip(centroid + cfg.reflection * (centroid - worst), lo, hi)
        fr = f(xr)
        if fr > values[0]:
            xe = np.clip(centroid + cfg.expansion * (xr - centroid), lo, hi)
            fe = f(xe)
            simplex[-1], values[-1] = (xe, fe) if fe > fr else (xr, fr)
        elif fr > values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if fr > values[-1]:
                xc = np.clip(centroid + cfg.contraction * (xr - centroid), lo, hi)
            else:
                xc = np.clip(centroid + cfg.contraction * (worst - centroid), lo, hi)
            fc = f(xc)
            if fc > max(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                best = simplex[0]
                for i in range(1, d + 1):
                    simplex[i] = np.clip(best + cfg.shrink * (simplex[i] - best), lo, hi)
                    values[i] = f(simplex[i])
        history.append(max(history[-1], float(values.max())))

    k = int(np.argmax(values))
    return SimplexResult(simplex[k].copy(), float(values[k]), history, evals, reason)


def adiabatic_nm(
    model: NvModel,
    T: float,
    start,
    rho0=Level.MINUS1,
    w: TargetWeights = TargetWeights(),
    cfg: SimplexConfig = SimplexConfig(),
    dt: float = 0.005,
    amplitude_cap: float = 12.0,
    resolution: float | None = None,
    split: LiouvillianSplit | None = None,
    seed: int | None = None,
) -> OptimizationRun:
    """Optimize (a, mu, sigma) of a mirrored Gaussian pair.

    Omega1 peaks at ``mu`` and Omega2 at ``T - mu``; ``a`` is in rad/ns.
    The simplex is clipped to ``search_bounds(T, amplitude_cap)``.
    """
    t0 = time.perf_counter()
    split = split or assemble_split(model)

    def build(x):
        a, mu, sigma = x
        return gaussian_stirap(GaussianParams.symmetric(a, mu, sigma, T), T, dt, model.carriers,
                               resolution=resolution)

    def objective(x):
        return eval_phi(model, build(x), rho0, w, split).phi

    res = nelder_mead(objective, start, search_bounds(T, amplitude_cap), cfg)
    best = build(res.x)
    value = eval_phi(model, best, rho0, w, split)
    return OptimizationRun(
        method="adiabatic-nm",
        seed=seed,
        field=best,
        p3=value.p3,
        p4bar=value.p4bar,
        E=value.E,
        phi_history=res.history,
        iters=len(res.history) - 1,
        wall_time_s=time.perf_counter() - t0,
        stop_reason=res.stop_reason,
        start={"a": float(start[0]), "mu": float(start[1]), "sigma": float(start[2])},
    )
