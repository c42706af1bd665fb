"""Basis systems on [0,1]: evaluation, Gram matrices, projection of sampled
curves, and least-squares reconstruction.

Two families are supported: cubic B-splines with equally spaced interior
knots, and the cosine family phi_1 = 1, phi_k(t) = sqrt(2) cos((k-1) pi t).
All integrals use the trapezoid rule on the observation grid, for both the
Gram matrix and curve projections, so project -> reconstruct is an exact
identity (to solver precision) for curves in the basis span.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import interpolate
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .core import (
    DegenerateInputError,
    IllConditionedBasisError,
    InvalidArgumentError,
    TimeGrid,
    _readonly,
)

BSPLINE_CUBIC = "bspline_cubic"
COSINE = "cosine"
_KINDS = (BSPLINE_CUBIC, COSINE)


@dataclass(frozen=True)
class BasisSystem:
    """K basis functions evaluated on a grid, with their Gram matrix.

    ``eval`` is the K x L matrix of basis values; ``gram`` is the K x K
    trapezoid-rule Gram matrix, guaranteed positive definite (a Cholesky
    factor is cached for reconstruction solves).
    """

    kind: str
    K: int
    grid: TimeGrid
    eval: np.ndarray
    gram: np.ndarray
    _cho: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "eval", _readonly(np.asarray(self.eval, float)))
        object.__setattr__(self, "gram", _readonly(np.asarray(self.gram, float)))

    @property
    def quad_weights(self) -> np.ndarray:
        return self.grid.trapezoid_weights()


def cosine_eval(K: int, points: np.ndarray) -> np.ndarray:
    """K x L values of the cosine family on the given points."""
    t = np.asarray(points, float)
    ks = np.arange(K)[:, None]
    out = np.sqrt(2.0) * np.cos(ks * np.pi * t[None, :])
    out[0] = 1.0
    return out


def _bspline_eval(K: int, points: np.ndarray) -> np.ndarray:
    # K cubic B-splines need K - 4 equally spaced interior knots.
    interior = np.linspace(0.0, 1.0, K - 2)[1:-1]
    knots = np.concatenate([[0.0] * 4, interior, [1.0] * 4])
    design = interpolate.BSpline.design_matrix(points, knots, 3, extrapolate=False)
    return design.toarray().T


def make_basis(kind: str, K: int, grid: TimeGrid) -> BasisSystem:
    """Evaluate a basis on ``grid`` and form its trapezoid Gram matrix."""
    if kind not in _KINDS:
        raise InvalidArgumentError(f"unknown basis kind {kind!r}")
    if kind == COSINE and K < 1:
        raise InvalidArgumentError("cosine basis needs K >= 1")
    if kind == BSPLINE_CUBIC and K < 4:
        raise InvalidArgumentError("cubic B-spline basis needs K >= 4")
    if kind == COSINE:
        ev = cosine_eval(K, grid.points)
    else:
        ev = _bspline_eval(K, grid.points)
    if not np.all(np.isfinite(ev)):
        raise IllConditionedBasisError("basis evaluation produced non-finite values")
    w = grid.trapezoid_weights()
    gram = (ev * w) @ ev.T
    gram = 0.5 * (gram + gram.T)
    try:
        cho = cho_factor(gram)
    except LinAlgError as exc:
        raise IllConditionedBasisError(
            f"Gram matrix not positive definite for {kind} K={K} on L={grid.L}"
        ) from exc
    return BasisSystem(kind=kind, K=K, grid=grid, eval=ev, gram=gram, _cho=cho)


def masked_quad_weights(grid: TimeGrid, observed: np.ndarray) -> np.ndarray:
    """Trapezoid weights restricted to panels whose two endpoints are observed.

    ``observed`` may carry leading batch dimensions; the result has the same
    shape. With a fully observed curve this reduces to the plain weights.
    """
    obs = np.asarray(observed, bool)
    d = grid.spacing
    ok = (obs[..., :-1] & obs[..., 1:]).astype(float)
    w = np.zeros(obs.shape, dtype=float)
    w[..., :-1] += 0.5 * d * ok
    w[..., 1:] += 0.5 * d * ok
    return w


def project(curve: np.ndarray, basis: BasisSystem, observed: np.ndarray = None) -> np.ndarray:
    """Trapezoid-rule inner products of sampled curves with each basis function.

    ``curve`` has shape (..., L); the result has shape (..., K). Panels with a
    missing endpoint are dropped (not rescaled). Raises if any curve in the
    batch has fewer than 2 observed points.
    """
    c = np.asarray(curve, float)
    if c.shape[-1] != basis.grid.L:
        raise InvalidArgumentError("curve length must match basis grid")
    if observed is None:
        w = basis.quad_weights
        vals = c
    else:
        obs = np.broadcast_to(np.asarray(observed, bool), c.shape)
        if np.any(obs.sum(axis=-1) < 2):
            raise DegenerateInputError("a curve has fewer than 2 observed points")
        w = masked_quad_weights(basis.grid, obs)
        vals = np.where(obs, c, 0.0)
    if not np.all(np.isfinite(np.where(w > 0, vals, 0.0))):
        raise InvalidArgumentError("curve has non-finite values at observed points")
    return (vals * w) @ basis.eval.T


def reconstruct(coeffs: np.ndarray, basis: BasisSystem) -> np.ndarray:
    """Least-squares curve for projection scores: Phi^T G^{-1} x.

    ``coeffs`` has shape (..., K); the result has shape (..., L). Uses the
    cached Cholesky factor of the Gram matrix, never an explicit inverse.
    When the basis is orthonormal on the grid this equals Phi^T x.
    """
    x = np.asarray(coeffs, float)
    if x.shape[-1] != basis.K:
        raise InvalidArgumentError("coefficient length must match basis size")
    flat = x.reshape(-1, basis.K)
    solved = cho_solve(basis._cho, flat.T)
    return (solved.T @ basis.eval).reshape(x.shape[:-1] + (basis.grid.L,))
