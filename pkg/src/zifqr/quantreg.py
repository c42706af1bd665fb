"""Scalar-on-function quantile regression on corrected coefficient vectors.

The functional term is reparameterized through the basis scores, so each fit
is a finite-dimensional quantile regression of Y on (xhat, Z). Fits solve the
exact check-loss linear program (split positive/negative residuals) with
HiGHS; the joint fit stacks all quantile levels into one LP with non-crossing
constraints enforced at every observed design row.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .basis import BasisSystem
from .core import (
    InvalidArgumentError,
    NumericalFailureError,
    RankDeficientError,
    _readonly,
)

TAU_MIN, TAU_MAX = 0.01, 0.99


@dataclass(frozen=True)
class QuantileFitResult:
    """Coefficients per quantile level, with optional reconstructed curves."""

    taus: np.ndarray  # H
    gamma: np.ndarray  # H x K
    theta: np.ndarray  # H x p
    objective: np.ndarray  # H attained check losses
    joint: bool
    beta_curves: np.ndarray = None  # H x L when a basis was supplied

    def __post_init__(self):
        for name in ("taus", "gamma", "theta", "objective"):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), float)))
        if self.beta_curves is not None:
            object.__setattr__(self, "beta_curves", _readonly(np.asarray(self.beta_curves, float)))

    @property
    def H(self) -> int:
        return self.taus.size


def check_loss(u, tau: float):
    """Asymmetric absolute loss u * (tau - 1{u < 0})."""
    u = np.asarray(u, float)
    out = u * (tau - (u < 0))
    return float(out) if out.ndim == 0 else out


def _validate_taus(taus):
    taus = np.atleast_1d(np.asarray(taus, float))
    if np.any((taus < TAU_MIN) | (taus > TAU_MAX)):
        raise InvalidArgumentError(f"tau levels must lie in [{TAU_MIN}, {TAU_MAX}]")
    if np.any(np.diff(taus) <= 0):
        raise InvalidArgumentError("tau levels must be strictly increasing")
    return taus


def _design(Y, xhat, Z):
    Y = np.asarray(Y, float)
    xhat = np.asarray(xhat, float)
    Z = np.asarray(Z, float)
    if xhat.ndim == 1:
        xhat = xhat.reshape(-1, 0) if xhat.size == 0 else xhat[:, None]
    n = Y.shape[0]
    if xhat.shape[0] != n or Z.shape[0] != n:
        raise InvalidArgumentError("Y, xhat, Z row counts differ")
    D = np.hstack([xhat, Z])
    q = D.shape[1]
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(Y))):
        raise InvalidArgumentError("design or response contains non-finite values")
    if n <= q:
        raise InvalidArgumentError(f"need n > K+p, got n={n}, K+p={q}")
    u, s, vt = np.linalg.svd(D, full_matrices=False)
    if s[-1] <= s[0] * 1e-10:
        null = vt[-1]
        worst = np.argsort(-np.abs(null))[:3]
        raise RankDeficientError(
            "design is rank deficient; null direction loads on columns "
            f"{worst.tolist()} with weights {np.round(null[worst], 4).tolist()}")
    return Y, D, xhat.shape[1], Z.shape[1]


def _solve_lp(c, A_eq, b_eq, A_ub, b_ub, bounds):
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub,
                  bounds=bounds, method="highs")
    if res.status != 0 or res.x is None:
        raise NumericalFailureError(f"LP solver failed: {res.message}")
    return res


def fit_separate(Y, xhat, Z, tau: float):
    """Exact check-loss fit at one quantile level.

    Returns (gamma, theta, objective) with gamma the coefficients of the
    functional scores and theta those of the scalar covariates.
    """
    tau = float(_validate_taus(tau)[0])
    Y, D, K, p = _design(Y, xhat, Z)
    n, q = D.shape
    c = np.concatenate([np.zeros(q), np.full(n, tau), np.full(n, 1.0 - tau)])
    A_eq = sparse.hstack(
        [sparse.csr_matrix(D), sparse.eye(n, format="csr"), -sparse.eye(n, format="csr")],
        format="csc")
    bounds = [(None, None)] * q + [(0, None)] * (2 * n)
    res = _solve_lp(c, A_eq, Y, None, None, bounds)
    b = res.x[:q]
    return b[:K], b[K:], float(res.fun)


def fit_joint(Y, xhat, Z, taus, basis: BasisSystem = None) -> QuantileFitResult:
    """One LP over all quantile levels with non-crossing constraints.

    For every design row i and adjacent levels, the fitted quantile at the
    higher level is constrained to be >= the fitted quantile at the lower
    level. A single level reduces exactly to the separate fit.
    """
    taus = _validate_taus(taus)
    Y, D, K, p = _design(Y, xhat, Z)
    n, q = D.shape
    H = taus.size
    block = q + 2 * n

    c = np.zeros(H * block)
    for h, tau in enumerate(taus):
        c[h * block + q: h * block + q + n] = tau
        c[h * block + q + n: h * block + q + 2 * n] = 1.0 - tau

    Ds = sparse.csr_matrix(D)
    eye = sparse.eye(n, format="csr")
    resid_block = sparse.hstack([Ds, eye, -eye], format="csr")
    empty = sparse.csr_matrix((n, block))
    eq_rows = [sparse.hstack([resid_block if g == h else empty for g in range(H)])
               for h in range(H)]
    A_eq = sparse.vstack(eq_rows, format="csc")
    b_eq = np.tile(Y, H)

    A_ub = b_ub = None
    if H > 1:
        pad = sparse.csr_matrix((n, 2 * n))
        Dpad = sparse.hstack([Ds, pad], format="csr")
        ub_rows = []
        for h in range(H - 1):
            row = [empty] * H
            row[h] = Dpad
            row[h + 1] = -Dpad
            ub_rows.append(sparse.hstack(row))
        A_ub = sparse.vstack(ub_rows, format="csc")
        b_ub = np.zeros((H - 1) * n)

    bounds = ([(None, None)] * q + [(0, None)] * (2 * n)) * H
    res = _solve_lp(c, A_eq, b_eq, A_ub, b_ub, bounds)

    gamma = np.empty((H, K))
    theta = np.empty((H, p))
    objective = np.empty(H)
    for h in range(H):
        b = res.x[h * block: h * block + q]
        gamma[h], theta[h] = b[:K], b[K:]
        r = Y - D @ b
        objective[h] = float(np.sum(check_loss(r, taus[h])))
    curves = gamma @ basis.eval if basis is not None else None
    return QuantileFitResult(taus, gamma, theta, objective, joint=True,
                             beta_curves=curves)


def fit_separate_grid(Y, xhat, Z, taus, basis: BasisSystem = None) -> QuantileFitResult:
    """Independent fits over a tau grid, packaged like a joint result."""
    taus = _validate_taus(taus)
    K = np.asarray(xhat).shape[1]
    p = np.asarray(Z).shape[1]
    gamma = np.empty((taus.size, K))
    theta = np.empty((taus.size, p))
    objective = np.empty(taus.size)
    for h, tau in enumerate(taus):
        gamma[h], theta[h], objective[h] = fit_separate(Y, xhat, Z, float(tau))
    curves = gamma @ basis.eval if basis is not None else None
    return QuantileFitResult(taus, gamma, theta, objective, joint=False,
                             beta_curves=curves)


def select_K_bic(Y, coeffs_by_K: dict, Z, taus) -> int:
    """Basis size minimizing the joint-fit information criterion.

    BIC(K) = sum_h n log(mean check loss at tau_h) + (K+p) H log n,
    evaluated on the joint fit; ties break toward the smaller K.
    """
    taus = _validate_taus(taus)
    if len(coeffs_by_K) < 1:
        raise InvalidArgumentError("need at least one candidate K")
    n = np.asarray(Y).shape[0]
    p = np.asarray(Z).shape[1]
    H = taus.size
    best_K, best_bic = None, np.inf
    for K in sorted(coeffs_by_K):
        try:
            fit = fit_joint(Y, coeffs_by_K[K], Z, taus)
        except Exception as exc:  # noqa: BLE001 - candidate-level isolation
            warnings.warn(f"BIC candidate K={K} failed: {exc}")
            continue
        mean_loss = np.maximum(fit.objective / n, 1e-300)
        bic = float(n * np.sum(np.log(mean_loss)) + (K + p) * H * np.log(n))
        if bic < best_bic:
            best_K, best_bic = K, bic
    if best_K is None:
        raise NumericalFailureError("all candidate basis sizes failed")
    return best_K


def beta_curve(gamma: np.ndarray, basis: BasisSystem) -> np.ndarray:
    """Coefficient function on the grid: sum_k gamma_k phi_k(t)."""
    gamma = np.asarray(gamma, float)
    if gamma.shape[-1] != basis.K:
        raise InvalidArgumentError("gamma length must match basis size")
    return gamma @ basis.eval
