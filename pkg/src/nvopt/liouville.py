"""Liouville-space representation and piecewise-constant propagation.

Density matrices are vectorized column-major: component ``l`` (0-based) of
the vector is ``rho[l % n, l // n]``. With this convention
``vec(A X B) = (B.T kron A) vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from . import _kernels
from .model import Level, NvModel

#: Relative truncation threshold of the Taylor series in ``expm_apply``.
EXPM_TOL = 1e-13


def vectorize(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F").astype(complex)


def devectorize(vec: np.ndarray, n: int | None = None) -> np.ndarray:
    vec = np.asarray(vec)
    if n is None:
        n = int(round(np.sqrt(vec.shape[-1])))
    # works for single vectors and for stacks of them
    return np.swapaxes(vec.reshape(vec.shape[:-1] + (n, n)), -1, -2)


def vec_index(m: int, k: int, n: int) -> int:
    """Position of rho[m, k] (0-based) inside the vectorized state."""
    return k * n + m


def master_rhs(rho, H, jumps: Iterable[tuple[np.ndarray, float]] = ()) -> np.ndarray:
    """Right-hand side of the Lindblad equation, linear in ``rho``.

    Written for arbitrary (not necessarily Hermitian) ``rho`` so it can be
    probed on the basis matrices |m><n|.
    """
    out = -1j * (H @ rho - rho @ H)
    for O, rate in jumps:
        Od = O.conj().T
        OdO = Od @ O
        out += 0.5 * rate * (2 * O @ rho @ Od - OdO @ rho - rho @ OdO)
    return out


def probe_superoperator(fn, n: int) -> np.ndarray:
    """Matrix of the linear map ``fn`` acting on vectorized n x n matrices."""
    L = np.empty((n * n, n * n), dtype=complex)
    for col in range(n * n):
        basis = np.zeros((n, n), dtype=complex)
        basis[col % n, col // n] = 1.0
        L[:, col] = vectorize(fn(basis))
    return L


def tensor_liouvillian(H, jumps: Iterable[tuple[np.ndarray, float]] = ()) -> np.ndarray:
    """Same superoperator as ``probe_superoperator(master_rhs)``, via Kronecker products."""
    n = H.shape[0]
    eye = np.eye(n)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for O, rate in jumps:
        OdO = O.conj().T @ O
        L += rate * (np.kron(O.conj(), O) - 0.5 * np.kron(eye, OdO) - 0.5 * np.kron(OdO.T, eye))
    return L


def hermitian_basis(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Real coordinates of Hermitian n x n matrices.

    Returns ``(T, Ti)`` with ``r = (T @ vec(rho)).real`` listing the diagonal,
    then Re rho[a, b] and Im rho[a, b] for a < b, and ``vec(rho) = Ti @ r``.
    """
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    m = len(pairs)
    T = np.zeros((n * n, n * n), dtype=complex)
    Ti = np.zeros((n * n, n * n), dtype=complex)
    for k in range(n):
        T[k, vec_index(k, k, n)] = 1.0
        Ti[vec_index(k, k, n), k] = 1.0
    for p, (a, b) in enumerate(pairs):
        re, im = n + p, n + m + p
        ab, ba = vec_index(a, b, n), vec_index(b, a, n)
        T[re, ab] = T[re, ba] = 0.5
        T[im, ab] = -0.5j
        T[im, ba] = 0.5j
        Ti[ab, re] = Ti[ba, re] = 1.0
        Ti[ab, im] = 1j
        Ti[ba, im] = -1j
    return T, Ti


def _union_csr(A: np.ndarray, B: np.ndarray):
    """Shared CSR pattern for A and B with separate data arrays."""
    pattern = sparse.csr_matrix((np.abs(A) + np.abs(B)) > 1e-14)
    pattern.sort_indices()
    rows = np.repeat(np.arange(A.shape[0]), np.diff(pattern.indptr))
    cols = pattern.indices
    return (
        pattern.indptr.astype(np.int64),
        cols.astype(np.int64),
        np.ascontiguousarray(A[rows, cols], dtype=float),
        np.ascontiguousarray(B[rows, cols], dtype=float),
    )


def _norm1(A: np.ndarray) -> float:
    return float(np.abs(A).sum(axis=0).max())


def _realify(T, L, Ti) -> np.ndarray:
    R = T @ L @ Ti
    if np.abs(R.imag).max() > 1e-9 * max(1.0, np.abs(R).max()):
        raise ValueError("superoperator does not preserve Hermiticity")
    R = R.real.copy()
    R[np.abs(R) < 1e-14 * max(1.0, np.abs(R).max())] = 0.0
    return R


@dataclass(frozen=True, eq=False)
class LiouvillianSplit:
    """Drift superoperator ``L0`` and field coupling ``Leps``.

    The generator of a segment with field value eps is ``L0 + eps * Leps``.
    """

    L0: np.ndarray
    Leps: np.ndarray
    _fwd: tuple = field(init=False, repr=False)
    _adj: tuple = field(init=False, repr=False)
    _le: tuple = field(init=False, repr=False)
    _basis: tuple = field(init=False, repr=False)

    def __post_init__(self):
        L0 = np.asarray(self.L0, dtype=complex)
        Le = np.asarray(self.Leps, dtype=complex)
        if L0.shape != Le.shape or L0.shape[0] != L0.shape[1]:
            raise ValueError("L0 and Leps must be square and of equal shape")
        for a in (L0, Le):
            a.setflags(write=False)
        object.__setattr__(self, "L0", L0)
        object.__setattr__(self, "Leps", Le)
        # propagation runs on the real coordinates of Hermitian matrices
        T, Ti = hermitian_basis(self.dim)
        R0, R1 = _realify(T, L0, Ti), _realify(T, Le, Ti)
        object.__setattr__(self, "_basis", (T, Ti))
        object.__setattr__(self, "_fwd", _union_csr(R0, R1) + (_norm1(R0), _norm1(R1)))
        object.__setattr__(self, "_adj", _union_csr(R0.T, R1.T) + (_norm1(R0.T), _norm1(R1.T)))
        le = sparse.csr_matrix(R1)
        le.sort_indices()
        object.__setattr__(
            self, "_le", (le.indptr.astype(np.int64), le.indices.astype(np.int64), le.data.astype(float))
        )

    def to_real(self, vec) -> np.ndarray:
        """Real coordinates of a vectorized Hermitian matrix (or a stack)."""
        return np.ascontiguousarray((np.asarray(vec, dtype=complex) @ self._basis[0].T).real)

    def from_real(self, r) -> np.ndarray:
        return np.asarray(r, dtype=float) @ self._basis[1].T

    def functional_to_real(self, c) -> np.ndarray:
        """Coefficients ``c_r`` with ``c_r @ r == c @ vec`` for real-valued ``c @ vec``."""
        return np.ascontiguousarray((np.asarray(c, dtype=complex) @ self._basis[1]).real)

    @property
    def dim(self) -> int:
        """Hilbert-space dimension n (the superoperators are n^2 x n^2)."""
        return int(round(np.sqrt(self.L0.shape[0])))

    def generator(self, eps: float) -> np.ndarray:
        return self.L0 + eps * self.Leps

    def trace_defect(self) -> float:
        """Largest entry of the trace functional applied to L0 and Leps."""
        n = self.dim
        tr = vectorize(np.eye(n)).real
        return float(max(np.abs(tr @ self.L0).max(), np.abs(tr @ self.Leps).max()))


def assemble_split(model: NvModel) -> LiouvillianSplit:
    """Probe the master equation column by column on |m><n|."""
    n = model.dims
    jumps = model.jump_operators()
    L0 = probe_superoperator(lambda r: master_rhs(r, model.H_static, jumps), n)
    Leps = probe_superoperator(lambda r: master_rhs(r, model.V_pattern), n)
    return LiouvillianSplit(L0, Leps)


def tensor_split(model: NvModel) -> LiouvillianSplit:
    """Independent Kronecker-product construction of ``assemble_split``."""
    return LiouvillianSplit(
        tensor_liouvillian(model.H_static, model.jump_operators()),
        tensor_liouvillian(model.V_pattern),
    )


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input to propagation")


def _hermitian_parts(L: LiouvillianSplit, vec: np.ndarray):
    """Split vec(X) into the real coordinates of (X + X^H)/2 and (X - X^H)/2i."""
    n = L.dim
    X = devectorize(vec, n)
    A = 0.5 * (X + X.conj().T)
    B = -0.5j * (X - X.conj().T)
    rb = L.to_real(vectorize(B))
    return L.to_real(vectorize(A)), (rb if np.any(rb) else None)


def _run(L: LiouvillianSplit, kernel, vec, *args):
    """Apply a real kernel to a general complex vectorized matrix."""
    vec = np.asarray(vec, dtype=complex)
    ra, rb = _hermitian_parts(L, vec)
    out = L.from_real(kernel(*args, ra))
    if rb is not None:
        out = out + 1j * L.from_real(kernel(*args, rb))
    return out


def step_propagate(rho_vec, L: LiouvillianSplit, eps_value: float, dt: float) -> np.ndarray:
    """Apply exp((L0 + eps*Leps) dt) to a vectorized state."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rho_vec = np.asarray(rho_vec, dtype=complex)
    _check_finite(rho_vec, np.asarray(eps_value), np.asarray(dt))
    ip, ix, d0, d1, n0, n1 = L._fwd
    return _run(L, lambda v: _kernels.expm_apply(ip, ix, d0, d1, float(eps_value), float(dt),
                                                  n0, n1, v, EXPM_TOL), rho_vec)


def sweep_real(L: LiouvillianSplit, eps: np.ndarray, dt: float, r0: np.ndarray) -> np.ndarray:
    """``sweep`` in real coordinates; rows are ``L.to_real`` of the states."""
    eps = np.ascontiguousarray(eps, dtype=float)
    r0 = np.ascontiguousarray(r0, dtype=float)
    _check_finite(eps, r0)
    ip, ix, d0, d1, n0, n1 = L._fwd
    return _kernels.forward_sweep(ip, ix, d0, d1, eps, float(dt), n0, n1, r0, EXPM_TOL)


def sweep(L: LiouvillianSplit, eps: np.ndarray, dt: float, rho0_vec) -> np.ndarray:
    """All N+1 vectorized states for the field samples ``eps``."""
    _check_finite(np.asarray(rho0_vec, dtype=complex))
    return _run(L, lambda v: sweep_real(L, eps, dt, v), rho0_vec)


def final_state(L: LiouvillianSplit, eps: np.ndarray, dt: float, rho0_vec) -> np.ndarray:
    eps = np.ascontiguousarray(eps, dtype=float)
    _check_finite(eps, np.asarray(rho0_vec, dtype=complex))
    ip, ix, d0, d1, n0, n1 = L._fwd
    return _run(L, lambda v: _kernels.final_state(ip, ix, d0, d1, eps, float(dt), n0, n1,
                                                   np.ascontiguousarray(v), EXPM_TOL), rho0_vec)


def rk4_sweep(L: LiouvillianSplit, eps: np.ndarray, dt: float, rho0_vec, substeps: int = 10) -> np.ndarray:
    """Runge-Kutta reference for ``sweep`` with the same piecewise-constant field."""
    eps = np.ascontiguousarray(eps, dtype=float)
    ip, ix, d0, d1, _, _ = L._fwd
    return _run(L, lambda v: _kernels.rk4_sweep(ip, ix, d0, d1, eps, float(dt), int(substeps),
                                                 np.ascontiguousarray(v)), rho0_vec)


def population(rho, k: Level | int, model: NvModel | None = None) -> float:
    """Population of level ``k``; a model maps level labels to positions.

    Without a model ``k`` is taken as a 1-based position in ``rho``.
    """
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = devectorize(rho)
    i = model.index(k) if model is not None else int(k) - 1
    p = float(rho[i, i].real)
    if -1e-7 < p < 0.0:
        p = 0.0
    return p


def populations(states: np.ndarray, n: int) -> np.ndarray:
    """Diagonals of a stack of vectorized states, shape (len(states), n)."""
    diag = [vec_index(k, k, n) for k in range(n)]
    return states[:, diag].real


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    levels: tuple[Level, ...]
    record: tuple[Level, ...]

    @property
    def dims(self) -> int:
        return len(self.levels)

    @property
    def populations(self) -> np.ndarray:
        """(N+1, len(record)) populations of the recorded levels."""
        pops = populations(self.states, self.dims)
        return pops[:, [self.levels.index(r) for r in self.record]]

    def population(self, level: Level) -> np.ndarray:
        k = self.levels.index(Level(level))
        return self.states[:, vec_index(k, k, self.dims)].real

    @property
    def traces(self) -> np.ndarray:
        return populations(self.states, self.dims).sum(axis=1)

    def final_rho(self) -> np.ndarray:
        return devectorize(self.states[-1], self.dims)


def propagate_trajectory(
    model: NvModel,
    field,
    rho0,
    record: Sequence[Level] | None = None,
    split: LiouvillianSplit | None = None,
) -> Trajectory:
    """Propagate ``rho0`` through every segment of ``field``.

    ``rho0`` may be a density matrix or a level. The state after segment j
    is stored at row j of ``Trajectory.states`` (row 0 is ``rho0``).
    """
    if isinstance(rho0, (Level, int)):
        rho0 = model.basis_state(rho0)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.dims, model.dims):
        raise ValueError(f"initial state has shape {rho0.shape}, model has {model.dims} levels")
    split = split or assemble_split(model)
    if split.dim != model.dims:
        raise ValueError("Liouvillian does not match the model dimension")
    states = sweep(split, field.eps_series(), field.dt, vectorize(rho0))
    times = np.arange(field.n_segments + 1) * field.dt
    record = tuple(model.levels if record is None else (Level(r) for r in record))
    return Trajectory(times, states, model.levels, record)


def physicality(states: np.ndarray, n: int) -> dict[str, float]:
    """Worst trace drift, Hermiticity defect and smallest eigenvalue over ``states``."""
    rhos = np.swapaxes(states.reshape(len(states), n, n), -1, -2)
    trace = np.einsum("kii->k", rhos)
    herm = np.abs(rhos - np.conj(np.swapaxes(rhos, -1, -2))).max(axis=(1, 2))
    hermitian_part = 0.5 * (rhos + np.conj(np.swapaxes(rhos, -1, -2)))
    eig = np.linalg.eigvalsh(hermitian_part).min(axis=1)
    return {
        "trace_drift": float(np.abs(trace - 1).max()),
        "hermiticity": float(herm.max()),
        "min_eigenvalue": float(eig.min()),
    }
