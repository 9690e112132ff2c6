"""Hermitian Lanczos with full reorthogonalization and locking.

Each restart converges the single most extreme Ritz pair of the operator
restricted to the orthogonal complement of the pairs locked so far, so
degenerate eigenvalues are recovered with their multiplicity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass
class LanczosResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    norm_estimate: float
    converged: bool
    iterations: int


def _as_matvec(op):
    if hasattr(op, "matvec") and hasattr(op, "matrix"):
        m = op.matrix
        return (lambda x: m @ x), m.shape[0]
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return (lambda x: op @ x), op.shape[0]
    if isinstance(op, spla.LinearOperator):
        return op.matvec, op.shape[0]
    raise TypeError(f"cannot apply operator of type {type(op).__name__}")


def lanczos_extremal(op, k: int = 1, which: str = "low", tol: float = 1e-8, maxiter: int = 600,
                     seed: int = 0, check_every: int = 5) -> LanczosResult:
    """k extremal eigenpairs with residual ||Hv - lambda v|| <= tol * ||H||_est.

    Non-convergence is reported through ``converged=False`` and a warning,
    together with the residuals actually reached.
    """
    if which not in ("low", "high"):
        raise ValueError("which must be 'low' or 'high'")
    apply, n = _as_matvec(op)
    if k < 1 or k > n:
        raise ValueError(f"k must lie in 1..{n}")
    sign = 1.0 if which == "low" else -1.0
    rng = np.random.default_rng(seed)
    locked = np.zeros((n, 0), dtype=complex)
    values, residuals = [], []
    norm_est = 0.0
    total_iter = 0
    all_ok = True

    def project(x):
        if locked.shape[1]:
            x = x - locked @ (locked.conj().T @ x)
        return x

    for _ in range(k):
        room = n - locked.shape[1]
        mmax = min(maxiter, room)
        v = project(rng.standard_normal(n) + 1j * rng.standard_normal(n))
        v /= np.linalg.norm(v)
        basis = np.zeros((n, mmax), dtype=complex)
        alpha = np.zeros(mmax)
        beta = np.zeros(mmax)
        basis[:, 0] = v
        theta, s, m = None, None, 0
        for j in range(mmax):
            w = project(apply(basis[:, j]))
            alpha[j] = float(np.real(np.vdot(basis[:, j], w)))
            w = w - alpha[j] * basis[:, j]
            if j > 0:
                w = w - beta[j - 1] * basis[:, j - 1]
            for _ in range(2):
                w = w - basis[:, : j + 1] @ (basis[:, : j + 1].conj().T @ w)
                w = project(w)
            beta[j] = np.linalg.norm(w)
            m = j + 1
            total_iter += 1
            done = beta[j] <= 1e-13 * max(norm_est, abs(alpha[j]), 1.0) or m == mmax
            if done or m % check_every == 0:
                ev, evec = sla.eigh_tridiagonal(alpha[:m], beta[: m - 1]) if m > 1 else (alpha[:1], np.ones((1, 1)))
                norm_est = max(norm_est, float(np.max(np.abs(ev))))
                i = 0 if sign > 0 else m - 1
                theta, s = ev[i], evec[:, i]
                if done or abs(beta[j] * s[-1]) <= 0.1 * tol * max(norm_est, 1e-300):
                    break
            if j + 1 < mmax:
                basis[:, j + 1] = w / beta[j]
        y = basis[:, :m] @ s
        y = project(y)
        y /= np.linalg.norm(y)
        r = np.linalg.norm(apply(y) - theta * y)
        ok = r <= tol * max(norm_est, 1e-300)
        all_ok = all_ok and ok
        locked = np.column_stack([locked, y])
        values.append(float(theta))
        residuals.append(float(r))
        if locked.shape[1] == n:
            break

    order = np.argsort(values) if sign > 0 else np.argsort(values)[::-1]
    res = LanczosResult(np.array(values)[order], locked[:, order], np.array(residuals)[order],
                        norm_est, all_ok, total_iter)
    if not all_ok:
        warnings.warn(f"Lanczos did not reach residual {tol:g}*||H||; worst residual {res.residuals.max():.3e}",
                      RuntimeWarning, stacklevel=2)
    return res
