"""Compiled inner loops for piecewise-constant Liouvillian propagation.

All arrays are real: states are Hermitian matrices written in real
coordinates (see ``liouville.hermitian_basis``), in which the Liouvillian
is a real matrix. The generator of segment j is ``A = L0 + eps[j] * Leps``. Both matrices are
stored in one CSR pattern (``indptr``, ``indices``) with separate value
arrays; each step combines them once and then only matvecs with A remain.

exp(A dt) v is evaluated by a truncated Taylor series on ``s`` substeps,
where ``s`` keeps the 1-norm bound of each substep generator below
``THETA``. Larger substeps need more terms but fewer in total; at THETA = 3
the cancellation loss stays near 1e-15.
"""

import numpy as np
from numba import njit

MAX_TERMS = 80
THETA = 3.0


@njit(cache=True)
def _matvec(indptr, indices, data, scale, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = scale * acc


@njit(cache=True)
def _combine(d0, d1, eps, data):
    for k in range(d0.shape[0]):
        data[k] = d0[k] + eps * d1[k]


@njit(cache=True)
def _expm_inplace(indptr, indices, data, bound, dt, y, term, nxt, tol):
    """y <- exp(A dt) y for A given by (indptr, indices, data)."""
    s = max(1, int(np.ceil(bound * dt / THETA)))
    h = dt / s
    n = y.shape[0]
    for _ in range(s):
        for i in range(n):
            term[i] = y[i]
        for k in range(1, MAX_TERMS + 1):
            _matvec(indptr, indices, data, h / k, term, nxt)
            tn = 0.0
            yn = 0.0
            for i in range(n):
                y[i] += nxt[i]
                tn += abs(nxt[i])
                yn += abs(y[i])
            for i in range(n):
                term[i] = nxt[i]
            if tn <= tol * yn:
                break


@njit(cache=True)
def expm_apply(indptr, indices, d0, d1, eps, dt, norm0, norm1, v, tol):
    """Return exp((L0 + eps*Leps) dt) @ v."""
    n = v.shape[0]
    data = np.empty(d0.shape[0], np.float64)
    _combine(d0, d1, eps, data)
    y = v.copy()
    _expm_inplace(indptr, indices, data, norm0 + abs(eps) * norm1, dt, y,
                  np.empty(n, np.float64), np.empty(n, np.float64), tol)
    return y


@njit(cache=True)
def forward_sweep(indptr, indices, d0, d1, eps, dt, norm0, norm1, v0, tol):
    """States after every segment; row 0 is the initial state."""
    N = eps.shape[0]
    n = v0.shape[0]
    out = np.empty((N + 1, n), np.float64)
    data = np.empty(d0.shape[0], np.float64)
    y = v0.copy()
    term = np.empty(n, np.float64)
    nxt = np.empty(n, np.float64)
    out[0] = y
    for j in range(N):
        _combine(d0, d1, eps[j], data)
        _expm_inplace(indptr, indices, data, norm0 + abs(eps[j]) * norm1, dt, y, term, nxt, tol)
        out[j + 1] = y
    return out


@njit(cache=True)
def final_state(indptr, indices, d0, d1, eps, dt, norm0, norm1, v0, tol):
    n = v0.shape[0]
    data = np.empty(d0.shape[0], np.float64)
    y = v0.copy()
    term = np.empty(n, np.float64)
    nxt = np.empty(n, np.float64)
    for j in range(eps.shape[0]):
        _combine(d0, d1, eps[j], data)
        _expm_inplace(indptr, indices, data, norm0 + abs(eps[j]) * norm1, dt, y, term, nxt, tol)
    return y


@njit(cache=True)
def adjoint_sweep(
    indptr_t, indices_t, d0_t, d1_t,
    eps, dt, norm0, norm1,
    le_indptr, le_indices, le_data,
    states, final_cost, running_cost, with_running, tol,
):
    """Contract costates with Leps applied to the stored forward states.

    Two costates are carried backwards through the transposed propagators:

    * ``lam`` with lam_N = final_cost and lam_{j-1} = exp(L_j dt)^T lam_j,
    * ``mu`` with mu_N = running_cost and
      mu_{j-1} = exp(L_j dt)^T mu_j + running_cost.

    Returns arrays (N,) of lam_j^T Leps rho_j and mu_j^T Leps rho_j; the
    second stays zero unless ``with_running``.
    """
    N = eps.shape[0]
    n = final_cost.shape[0]
    s_final = np.empty(N, np.float64)
    s_run = np.zeros(N, np.float64)
    lam = final_cost.astype(np.float64)
    mu = running_cost.astype(np.float64)
    w = np.empty(n, np.float64)
    term = np.empty(n, np.float64)
    nxt = np.empty(n, np.float64)
    data = np.empty(d0_t.shape[0], np.float64)
    for j in range(N, 0, -1):
        _matvec(le_indptr, le_indices, le_data, 1.0, states[j], w)
        a = 0.0
        b = 0.0
        for i in range(n):
            a += lam[i] * w[i]
            b += mu[i] * w[i]
        s_final[j - 1] = a
        s_run[j - 1] = b
        if j > 1:
            e = eps[j - 1]
            _combine(d0_t, d1_t, e, data)
            bound = norm0 + abs(e) * norm1
            _expm_inplace(indptr_t, indices_t, data, bound, dt, lam, term, nxt, tol)
            if with_running:
                _expm_inplace(indptr_t, indices_t, data, bound, dt, mu, term, nxt, tol)
                for i in range(n):
                    mu[i] += running_cost[i]
    return s_final, s_run


@njit(cache=True)
def rk4_sweep(indptr, indices, d0, d1, eps, dt, substeps, v0):
    """Classical RK4 with ``substeps`` steps per constant segment."""
    N = eps.shape[0]
    n = v0.shape[0]
    out = np.empty((N + 1, n), np.float64)
    out[0] = v0
    y = v0.copy()
    h = dt / substeps
    data = np.empty(d0.shape[0], np.float64)
    k1 = np.empty(n, np.float64)
    k2 = np.empty(n, np.float64)
    k3 = np.empty(n, np.float64)
    k4 = np.empty(n, np.float64)
    tmp = np.empty(n, np.float64)
    for j in range(N):
        _combine(d0, d1, eps[j], data)
        for _ in range(substeps):
            _matvec(indptr, indices, data, 1.0, y, k1)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            _matvec(indptr, indices, data, 1.0, tmp, k2)
            for i in range(n):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            _matvec(indptr, indices, data, 1.0, tmp, k3)
            for i in range(n):
                tmp[i] = y[i] + h * k3[i]
            _matvec(indptr, indices, data, 1.0, tmp, k4)
            for i in range(n):
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        out[j + 1] = y
    return out
