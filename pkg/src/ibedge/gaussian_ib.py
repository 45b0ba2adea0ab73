"""Closed-form Gaussian information bottleneck.

For jointly Gaussian ``(x, y)`` the optimal encoder is the noisy linear map
``T = A x + xi`` with ``xi ~ N(0, I)``. Its rows are scaled left eigenvectors
of ``C_{X|Y} C_X^{-1}``, switched on one at a time as the trade-off parameter
``beta`` crosses the critical values ``1 / (1 - lambda_i)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError

from .numerics import generalized_symmetric_eig, is_positive_semidefinite

# eigenvalues this close to 1 are directions that carry no information on y
LAMBDA_ONE_SNAP = 1e-10
LAMBDA_RANGE_TOL = 1e-9
LAMBDA_FLOOR = 1e-12

CURVE_FIELDS = ("beta", "n_beta", "complexity_bits", "relevance_bits", "nmse")


class SourceError(ValueError):
    """Covariance data violate a Gaussian-source invariant."""


def _frozen(a: ArrayLike) -> NDArray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GaussianSource:
    """Second-order statistics of a zero-mean jointly Gaussian pair (x, y)."""

    C_X: NDArray
    C_Y: NDArray
    C_XY: NDArray

    def __post_init__(self):
        C_X = np.atleast_2d(_frozen(self.C_X))
        C_Y = np.atleast_2d(_frozen(self.C_Y))
        C_XY = np.array(self.C_XY, dtype=float)
        if C_XY.ndim < 2:
            C_XY = C_XY.reshape(C_X.shape[0], -1)
        C_XY.setflags(write=False)
        object.__setattr__(self, "C_X", C_X)
        object.__setattr__(self, "C_Y", C_Y)
        object.__setattr__(self, "C_XY", C_XY)

        d_x, d_y = C_X.shape[0], C_Y.shape[0]
        if C_X.shape != (d_x, d_x) or C_Y.shape != (d_y, d_y):
            raise SourceError("C_X and C_Y must be square")
        if C_XY.shape != (d_x, d_y):
            raise SourceError(f"C_XY must have shape ({d_x}, {d_y}), got {C_XY.shape}")
        for name, M in (("C_X", C_X), ("C_Y", C_Y)):
            scale = max(1.0, float(np.abs(M).max()))
            if not np.allclose(M, M.T, atol=1e-10 * scale):
                raise SourceError(f"{name} is not symmetric")
            try:
                np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                raise SourceError(f"{name} is not positive definite") from None
        joint = np.block([[C_X, C_XY], [C_XY.T, C_Y]])
        if not is_positive_semidefinite(joint, tol=1e-10):
            raise SourceError("joint covariance [[C_X, C_XY], [C_XY^T, C_Y]] is not positive semidefinite")

    @property
    def d_x(self) -> int:
        return self.C_X.shape[0]

    @property
    def d_y(self) -> int:
        return self.C_Y.shape[0]

    def conditional_cov(self) -> NDArray:
        """C_{X|Y} = C_X - C_XY C_Y^{-1} C_XY^T."""
        return self.C_X - self.C_XY @ np.linalg.solve(self.C_Y, self.C_XY.T)

    def mutual_information_bits(self) -> float:
        """I(X; Y) in bits computed from log-determinants."""
        _, ld_x = np.linalg.slogdet(self.C_X)
        _, ld_c = np.linalg.slogdet(self.conditional_cov())
        return 0.5 * (ld_x - ld_c) / math.log(2.0)


@dataclass(frozen=True, eq=False)
class GibSolution:
    """Eigenstructure of the Gaussian IB problem for one source.

    ``vectors[i]`` is the left eigenvector paired with ``lambdas[i]``;
    eigenvalues are ascending so ``beta_crit`` is ascending as well.
    """

    lambdas: NDArray
    vectors: NDArray
    r_vals: NDArray
    beta_crit: NDArray
    source: GaussianSource = field(repr=False)

    @property
    def n_informative(self) -> int:
        return int(np.count_nonzero(self.lambdas < 1.0))

    def n_active(self, beta: float) -> int:
        return int(np.count_nonzero(beta >= self.beta_crit))

    def max_relevance_bits(self) -> float:
        lam = self.lambdas[self.lambdas < 1.0]
        return float(-0.5 * np.sum(np.log2(lam)))


@dataclass(frozen=True, eq=False)
class GibOperatingPoint:
    beta: float
    n_beta: int
    A: NDArray
    complexity_bits: float
    relevance_bits: float
    nmse: float

    @property
    def d_t(self) -> int:
        return self.n_beta

    def as_row(self) -> dict:
        return {
            "beta": self.beta,
            "n_beta": self.n_beta,
            "complexity_bits": self.complexity_bits,
            "relevance_bits": self.relevance_bits,
            "nmse": self.nmse,
        }


def solve_gib(source: GaussianSource) -> GibSolution:
    """Eigen-decompose ``C_{X|Y} C_X^{-1}`` through the pencil ``(C_{X|Y}, C_X)``.

    Left eigenvectors of ``C_{X|Y} C_X^{-1}`` solve ``C_{X|Y} v = lam C_X v``.
    The returned vectors are C_X-orthonormal, so every ``r_i`` is 1 up to
    rounding; ``r_vals`` is still computed explicitly.
    """
    C_cond = source.conditional_cov()
    try:
        lam, U = generalized_symmetric_eig(C_cond, source.C_X)
    except LinAlgError as exc:
        raise SourceError(str(exc)) from exc
    if lam[0] < -LAMBDA_RANGE_TOL or lam[-1] > 1.0 + LAMBDA_RANGE_TOL:
        raise SourceError(
            f"eigenvalues outside [0, 1] (min {lam[0]:.3g}, max {lam[-1]:.3g}); joint covariance is not valid"
        )
    lam = np.clip(lam, LAMBDA_FLOOR, 1.0)
    lam[lam > 1.0 - LAMBDA_ONE_SNAP] = 1.0
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    V = U[:, order].T
    r = np.einsum("ij,jk,ik->i", V, source.C_X, V)
    with np.errstate(divide="ignore"):
        beta_c = np.where(lam < 1.0, 1.0 / (1.0 - lam), np.inf)
    return GibSolution(_frozen(lam), _frozen(V), _frozen(r), _frozen(beta_c), source)


def encoder_matrix(sol: GibSolution, beta: float) -> NDArray:
    """Rows ``alpha_i v_i^T`` for the active components; shape (n_beta, d_x)."""
    n = sol.n_active(beta)
    lam = sol.lambdas[:n]
    num = np.maximum(beta * (1.0 - lam) - 1.0, 0.0)
    alpha = np.sqrt(num / (lam * sol.r_vals[:n]))
    return alpha[:, None] * sol.vectors[:n]


def _mi_terms(sol: GibSolution, beta: float) -> tuple[float, float]:
    n = sol.n_active(beta)
    if n == 0:
        return 0.0, 0.0
    lam = sol.lambdas[:n]
    cx = np.maximum(np.log2((beta - 1.0) * (1.0 - lam) / lam), 0.0)
    cond = np.maximum(np.log2(beta * (1.0 - lam)), 0.0)
    complexity = 0.5 * float(np.sum(cx))
    relevance = max(complexity - 0.5 * float(np.sum(cond)), 0.0)
    return complexity, relevance


def compute_nmse(sol: GibSolution, beta: float, A: NDArray | None = None) -> float:
    """MSE of the linear MMSE estimate of y from T, normalized by tr(C_Y)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    src = sol.source
    if A is None:
        A = encoder_matrix(sol, beta)
    tr_y = float(np.trace(src.C_Y))
    if A.shape[0] == 0:
        return 1.0
    sigma_t = A @ src.C_X @ A.T + np.eye(A.shape[0])
    sigma_yt = src.C_XY.T @ A.T
    explained = float(np.trace(sigma_yt @ np.linalg.solve(sigma_t, sigma_yt.T)))
    return float(np.clip((tr_y - explained) / tr_y, 0.0, 1.0))


def operating_point(sol: GibSolution, beta: float) -> GibOperatingPoint:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    beta = float(beta)
    A = encoder_matrix(sol, beta)
    A.setflags(write=False)
    complexity, relevance = _mi_terms(sol, beta)
    return GibOperatingPoint(
        beta=beta,
        n_beta=A.shape[0],
        A=A,
        complexity_bits=complexity,
        relevance_bits=relevance,
        nmse=compute_nmse(sol, beta, A),
    )


def relevance_complexity_curve(sol: GibSolution, betas: Iterable[float]) -> list[GibOperatingPoint]:
    grid = np.asarray(list(betas), dtype=float)
    if grid.size == 0:
        raise ValueError("beta grid is empty")
    if np.any(~(grid > 0)):
        raise ValueError("beta grid values must be positive")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("beta grid must be strictly increasing")
    return [operating_point(sol, b) for b in grid]


def make_synthetic_source(d_x: int, d_y: int, snr: float, seed: int) -> GaussianSource:
    """Linear model ``x = H y + w`` with ``y ~ N(0, I)`` and ``w ~ N(0, I)``.

    ``H`` has i.i.d. N(0, snr / d_y) entries, drawn from `seed`.
    """
    if d_y < 1 or d_x < 1:
        raise ValueError("dimensions must be positive")
    if d_y > d_x:
        raise ValueError(f"d_y={d_y} must not exceed d_x={d_x}")
    if not snr > 0:
        raise ValueError("snr must be positive")
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((d_x, d_y)) * math.sqrt(snr / d_y)
    return GaussianSource(C_X=H @ H.T + np.eye(d_x), C_Y=np.eye(d_y), C_XY=H)


def write_curve_csv(points: Sequence[GibOperatingPoint], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_FIELDS)
        for p in points:
            writer.writerow([repr(p.beta), p.n_beta, repr(p.complexity_bits), repr(p.relevance_bits), repr(p.nmse)])
    return path


def read_curve_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        {k: (int(v) if k == "n_beta" else float(v)) for k, v in row.items()}
        for row in rows
    ]
