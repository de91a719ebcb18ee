"""Invariant suite and independent oracles.

The oracles here use dense ``scipy.linalg.expm`` and Kronecker products
only, so they share no code path with the compiled propagation kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .grape import GrapeConfig, TargetWeights, eval_phi, grad_phi, grape_optimize
from .liouville import (
    LiouvillianSplit,
    assemble_split,
    master_rhs,
    physicality,
    probe_superoperator,
    rk4_sweep,
    step_propagate,
    sweep,
    tensor_liouvillian,
    tensor_split,
    vec_index,
    vectorize,
)
from .model import Level, build_interaction_model
from .pulses import ControlField, GaussianParams, constant_field, deps_domega, gaussian_stirap, perturb


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        limit = "exact" if self.threshold == 0 else f"limit {self.threshold:.1e}"
        return f"{status}  {self.name}: {self.value:.3e} ({limit})"


def _below(name, value, limit) -> Check:
    value = float(value)
    return Check(name, value, limit, bool(value < limit))


def _exact(name, difference) -> Check:
    difference = float(difference)
    return Check(name, difference, 0.0, difference == 0.0)


def random_lindblad(rng: np.random.Generator, n: int, n_jumps: int = 3):
    """Random Hermitian H and (O, rate) jump pairs on n levels."""
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    H = 0.5 * (A + A.conj().T)
    jumps = []
    for _ in range(n_jumps):
        O = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        jumps.append((O, float(rng.uniform(0.01, 1.0))))
    return H, jumps


def dense_first_order_phi(
    model,
    field: ControlField,
    w: TargetWeights,
    j: int,
    tone: int,
    h: float,
    split: LiouvillianSplit | None = None,
) -> float:
    """phi with segment ``j`` (0-based) propagator replaced by
    (I + h dt d(eps_j)/d(Omega_tone) Leps) exp(L_j dt).

    Its central difference in ``h`` is the first-order gradient of phi
    with respect to Omega_tone(j).
    """
    split = split or tensor_split(model)
    n = model.dims
    eps = field.eps_series()
    c = deps_domega(field)[tone - 1]
    r = vectorize(model.basis_state(Level.MINUS1))
    ka = vec_index(model.index(Level.A2), model.index(Level.A2), n)
    kp = vec_index(model.index(Level.PLUS1), model.index(Level.PLUS1), n)
    pa = []
    for k, e in enumerate(eps):
        r = expm(split.generator(e) * field.dt) @ r
        if k == j:
            r = r + h * field.dt * c[k] * (split.Leps @ r)
        pa.append(r[ka].real)
    return float(r[kp].real + w.lam * np.mean(pa) + w.lam_E * field.energy())


def exact_phi(model, field: ControlField, w: TargetWeights, split=None) -> float:
    """phi via dense expm of every segment."""
    split = split or tensor_split(model)
    n = model.dims
    r = vectorize(model.basis_state(Level.MINUS1))
    ka = vec_index(model.index(Level.A2), model.index(Level.A2), n)
    kp = vec_index(model.index(Level.PLUS1), model.index(Level.PLUS1), n)
    pa = []
    for e in field.eps_series():
        r = expm(split.generator(e) * field.dt) @ r
        pa.append(r[ka].real)
    return float(r[kp].real + w.lam * np.mean(pa) + w.lam_E * field.energy())


def random_field(model, rng: np.random.Generator, N: int, dt: float, Delta: float = 0.3) -> ControlField:
    f = constant_field(1.0, 1.0, N * dt, dt, model.carriers, Delta)
    return f.with_blocks(rng.uniform(0.5, 3.0, N), rng.uniform(0.5, 3.0, N))


def gradient_oracle_error(model, rng: np.random.Generator, N: int = 40, dt: float = 0.01,
                          w: TargetWeights = TargetWeights(lam=-0.5), h: float = 1e-5) -> float:
    """Worst relative error of grad_phi against first-order central differences."""
    field = random_field(model, rng, N, dt)
    g = grad_phi(model, field, w=w, split=assemble_split(model))
    split = tensor_split(model)
    worst = 0.0
    for tone, comp in ((1, g.dphi_dOmega1), (2, g.dphi_dOmega2)):
        for j in range(N):
            fd = (dense_first_order_phi(model, field, w, j, tone, h, split)
                  - dense_first_order_phi(model, field, w, j, tone, -h, split)) / (2 * h)
            scale = max(abs(fd), 1e-8)
            worst = max(worst, abs(comp[j] - fd) / scale)
    return worst


def run_invariant_suite(seed: int = 0) -> list[Check]:
    """Fast structural and numerical invariants; every check must pass."""
    rng = np.random.default_rng(seed)
    checks: list[Check] = []
    m10 = build_interaction_model()
    checks.append(_below("hamiltonian hermiticity", np.abs(m10.H_static - m10.H_static.conj().T).max(), 1e-14))
    checks.append(_below("dipole hermiticity", np.abs(m10.V_pattern - m10.V_pattern.conj().T).max(), 1e-14))
    checks.append(Check("jump channels == 23", len(m10.jumps), 23, len(m10.jumps) == 23))

    L = assemble_split(m10)
    Lt = tensor_split(m10)
    checks.append(_below("liouvillian probe vs tensor (10-level)",
                         max(np.abs(L.L0 - Lt.L0).max(), np.abs(L.Leps - Lt.Leps).max()), 1e-12))
    worst = 0.0
    for _ in range(5):
        n = int(rng.integers(2, 5))
        H, jumps = random_lindblad(rng, n)
        P = probe_superoperator(lambda r: master_rhs(r, H, jumps), n)
        worst = max(worst, np.abs(P - tensor_liouvillian(H, jumps)).max())
    checks.append(_below("liouvillian probe vs tensor (random)", worst, 1e-12))
    checks.append(_below("trace preservation of generator", L.trace_defect(), 1e-12))

    X = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    v = vectorize(X)
    ref = expm(L.generator(4.0) * 0.005) @ v
    checks.append(_below("exponential action vs dense expm",
                         np.abs(step_propagate(v, L, 4.0, 0.005) - ref).max() / np.abs(ref).max(), 1e-12))

    f = gaussian_stirap(GaussianParams.default(5.0, 2.0), 2.0, 0.005, m10.carriers)
    rho0 = vectorize(m10.basis_state(Level.MINUS1))
    states = sweep(L, f.eps_series(), f.dt, rho0)
    phys = physicality(states, 10)
    checks.append(_below("trace drift", phys["trace_drift"], 1e-8))
    checks.append(_below("hermiticity defect", phys["hermiticity"], 1e-10))
    checks.append(_below("negative eigenvalue", max(0.0, -phys["min_eigenvalue"]), 1e-7))
    rk = rk4_sweep(L, f.eps_series(), f.dt, rho0, 10)
    diag = [k * 10 + k for k in range(10)]
    checks.append(_below("rk4 agreement", np.abs(states[:, diag] - rk[:, diag]).max(), 1e-6))

    m3 = build_interaction_model(dims=3, dissipation=False)
    checks.append(_below("gradient vs first-order differences (3-level)",
                         gradient_oracle_error(m3, rng, N=20), 1e-3))

    p0 = eval_phi(m10, f, split=L).p3
    checks.append(_exact("robustness identity", eval_phi(m10, perturb(f, 0.0, 0.0), split=L).p3 - p0))
    rt = ControlField.from_dict(f.to_dict())
    checks.append(_exact("pulse file round trip",
                         max(np.abs(rt.omega1 - f.omega1).max(), np.abs(rt.eps_series() - f.eps_series()).max())))

    f0 = constant_field(2.0, 2.0, 0.5, 0.005, m10.carriers)
    runs = [grape_optimize(m10, f0, cfg=GrapeConfig(max_iters=3), split=L) for _ in range(2)]
    checks.append(_exact("optimizer determinism", abs(runs[0].p3 - runs[1].p3)
                         + np.abs(runs[0].field.omega1 - runs[1].field.omega1).max()))
    return checks
