"""Special functions and dense linear-algebra helpers.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, cho_factor, solve_triangular


@dataclass(frozen=True)
class ToleranceConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_iter: int = 100

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


DEFAULT_TOL = ToleranceConfig()

_E = np.e


def _initial_guess(x: NDArray) -> NDArray:
    # series around 0 for small x, log asymptotics above e, blend in between
    w = np.empty_like(x)
    small = x < 0.5
    mid = (x >= 0.5) & (x <= _E)
    big = x > _E
    xs = x[small]
    w[small] = xs - xs**2 + 1.5 * xs**3
    w[mid] = np.log1p(x[mid]) * (1.0 - np.log1p(np.log1p(x[mid])) / (2.0 + np.log1p(x[mid])))
    lx = np.log(x[big])
    w[big] = lx - np.log(lx) + np.log(lx) / lx
    return w


def lambert_w0(x: ArrayLike, tol: ToleranceConfig = DEFAULT_TOL):
    """Principal branch of the Lambert W function for nonnegative real input.

    Halley iteration on ``w * exp(w) = x``. Accepts scalars or arrays and
    returns the same shape (a Python float for scalar input).

    Raises
    ------
    ValueError
        If any entry of `x` is negative or NaN.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()
    if np.any(~(flat >= 0)):
        raise ValueError("lambert_w0 is only defined here for x >= 0")
    if np.any(np.isinf(flat)):
        raise ValueError("lambert_w0 requires finite input")

    w = _initial_guess(flat)
    active = flat > 0
    w[~active] = 0.0
    for _ in range(tol.max_iter):
        if not active.any():
            break
        wa = w[active]
        xa = flat[active]
        ew = np.exp(wa)
        f = wa * ew - xa
        wp1 = wa + 1.0
        step = f / (ew * wp1 - (wa + 2.0) * f / (2.0 * wp1))
        wa = wa - step
        w[active] = wa
        done = (np.abs(f) <= 1e-3 * tol.rel_tol * np.maximum(1.0, xa)) | (
            np.abs(step) <= 4 * np.finfo(float).eps * (1.0 + np.abs(wa))
        )
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    w = np.maximum(w, 0.0)
    if scalar:
        return float(w[0])
    return w.reshape(arr.shape)


def is_positive_semidefinite(M: ArrayLike, tol: float = 1e-10) -> bool:
    """True iff the smallest eigenvalue of symmetric `M` is >= -tol * ||M||."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.size == 0:
        return True
    scale = np.linalg.norm(M, 2)
    if not np.allclose(M, M.T, atol=max(tol, 1e-12) * max(scale, 1.0)):
        raise ValueError("matrix is not symmetric within tolerance")
    lam_min = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
    return bool(lam_min >= -tol * scale)


def generalized_symmetric_eig(A: ArrayLike, B: ArrayLike) -> tuple[NDArray, NDArray]:
    """Solve ``A u = lam B u`` for symmetric `A` and SPD `B`.

    Uses the Cholesky reduction ``B = L L^T`` followed by a standard symmetric
    eigensolve of ``L^{-1} A L^{-T}``.

    Returns
    -------
    eigenvalues : ndarray, shape (n,)
        Ascending.
    eigenvectors : ndarray, shape (n, n)
        Columns are B-orthonormal: ``U.T @ B @ U = I``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if B.shape != A.shape:
        raise ValueError(f"dimension mismatch: A {A.shape} vs B {B.shape}")
    try:
        L, _ = cho_factor(0.5 * (B + B.T), lower=True)
    except LinAlgError as exc:
        raise LinAlgError("B is not positive definite") from exc
    L = np.tril(L)
    As = 0.5 * (A + A.T)
    tmp = solve_triangular(L, As, lower=True)
    C = solve_triangular(L, tmp.T, lower=True)
    C = 0.5 * (C + C.T)
    lam, Y = np.linalg.eigh(C)
    U = solve_triangular(L.T, Y, lower=False)
    return lam, U
