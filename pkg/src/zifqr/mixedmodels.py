"""Random-intercept models for measurement-error correction.

The core fit is a one-way random-effects model y_ij = a0 + a_i + e_ij with
a_i ~ N(0, sigma_a^2) and e_ij ~ N(0, sigma_e^2). For fully observed balanced
data the variance components come from the closed-form ANOVA estimators
(negative estimates truncated at zero); unbalanced data fall back to a 1-D
profile likelihood search over the variance ratio. Subject-level predictions
are the usual shrunken BLUPs.

Pointwise competitors fit, at every grid point, either this Gaussian model,
a Poisson random-intercept GLMM (fixed-node Gauss-Hermite quadrature), or a
zero-inflated Poisson mixed model estimated by EM.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .core import (
    InvalidArgumentError,
    ReplicatedFunctionalDataset,
    _readonly,
)

GH_NODES = 20
MEAN_FLOOR = 1e-8

_gh_x, _gh_w = special.roots_hermite(GH_NODES)
_gh_logw = np.log(_gh_w) - 0.5 * math.log(math.pi)


# ---------------------------------------------------------------------------
# Gaussian random intercept
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomInterceptFit:
    """One-way random-effects fit with per-subject BLUPs.

    ``shrinkage[i]`` is sigma_a^2 / (sigma_a^2 + sigma_e^2 / J_i); the
    subject prediction is xhat_i = alpha0 + shrinkage_i * (ybar_i - alpha0).
    """

    alpha0: float
    sigma_a2: float
    sigma_e2: float
    blups: np.ndarray
    shrinkage: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "blups", _readonly(np.asarray(self.blups, float)))
        object.__setattr__(self, "shrinkage", _readonly(np.asarray(self.shrinkage, float)))

    @property
    def xhat(self) -> np.ndarray:
        return self.alpha0 + self.blups


def _profile_neg2ll(psi, ybar, ssw, counts, N):
    w = counts / (1.0 + psi * counts)
    alpha0 = np.sum(w * ybar) / np.sum(w)
    quad = np.sum(ssw) + np.sum(counts * (ybar - alpha0) ** 2 / (1.0 + psi * counts))
    s2 = quad / N
    if s2 <= 0:
        return np.inf, alpha0, 0.0
    return N * math.log(s2) + np.sum(np.log1p(psi * counts)), alpha0, s2


def fit_random_intercept(y: np.ndarray, observed: np.ndarray = None) -> RandomInterceptFit:
    """Fit the random-intercept model to an n x J table with optional mask."""
    y = np.asarray(y, float)
    if y.ndim != 2:
        raise InvalidArgumentError("y must be n x J")
    n, J = y.shape
    if n < 2:
        raise InvalidArgumentError("need at least 2 subjects")
    obs = np.ones_like(y, bool) if observed is None else np.asarray(observed, bool)
    counts = obs.sum(axis=1)
    if not np.any(counts >= 2):
        raise InvalidArgumentError(
            "no subject has 2 observed replicates; variance components unidentifiable"
        )
    yz = np.where(obs, y, 0.0)
    if not np.all(np.isfinite(yz)):
        raise InvalidArgumentError("non-finite observed values")
    sums = yz.sum(axis=1)
    ybar = np.divide(sums, counts, out=np.zeros(n), where=counts > 0)
    ssw = (np.where(obs, y - ybar[:, None], 0.0) ** 2).sum(axis=1)
    N = int(counts.sum())

    vals = y[obs]
    if np.all(vals == vals[0]):
        # No variance anywhere: flat fit.
        shrink = np.zeros(n)
        return RandomInterceptFit(float(vals[0]), 0.0, 0.0, np.zeros(n),
                                  shrink, degenerate=True)

    balanced = observed is None or bool(obs.all())
    if balanced:
        grand = vals.mean()
        msw = ssw.sum() / (n * (J - 1)) if J > 1 else 0.0
        msb = J * np.sum((ybar - grand) ** 2) / (n - 1)
        sigma_e2 = msw
        sigma_a2 = max(0.0, (msb - msw) / J)
        alpha0 = grand
    else:
        if np.max(ssw) == 0.0:
            # Noise-free replicates: all between-subject variance.
            ok = counts > 0
            alpha0 = float(np.mean(ybar[ok]))
            sigma_e2 = 0.0
            sigma_a2 = float(np.mean((ybar[ok] - alpha0) ** 2))
            shrink = np.where(counts > 0, 1.0, 0.0)
            blups = shrink * (ybar - alpha0)
            return RandomInterceptFit(alpha0, sigma_a2, sigma_e2, blups, shrink)
        # Profile ML over psi = sigma_a^2 / sigma_e^2 on a log grid + refine.
        ybar_f, ssw_f, counts_f = ybar[counts > 0], ssw[counts > 0], counts[counts > 0]
        grid = np.concatenate([[0.0], np.logspace(-6, 7, 40)])
        vals_grid = [_profile_neg2ll(p, ybar_f, ssw_f, counts_f, N)[0] for p in grid]
        j = int(np.argmin(vals_grid))
        lo = grid[max(0, j - 1)]
        hi = grid[min(len(grid) - 1, j + 1)]
        if hi > lo:
            res = optimize.minimize_scalar(
                lambda p: _profile_neg2ll(p, ybar_f, ssw_f, counts_f, N)[0],
                bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-10 * (1 + hi)})
            psi = res.x if res.fun <= vals_grid[j] else grid[j]
        else:
            psi = grid[j]
        _, alpha0, sigma_e2 = _profile_neg2ll(psi, ybar_f, ssw_f, counts_f, N)
        sigma_a2 = psi * sigma_e2

    denom = sigma_a2 + np.divide(sigma_e2, counts, out=np.full(n, np.inf), where=counts > 0)
    with np.errstate(invalid="ignore"):
        shrink = np.divide(sigma_a2, denom, out=np.zeros(n), where=denom > 0)
    shrink = np.where((sigma_e2 == 0.0) & (counts > 0) & (sigma_a2 > 0), 1.0, shrink)
    blups = shrink * (ybar - alpha0)
    blups = np.where(counts > 0, blups, 0.0)
    return RandomInterceptFit(float(alpha0), float(sigma_a2), float(sigma_e2),
                              blups, shrink)


# ---------------------------------------------------------------------------
# Pointwise fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointwiseMixedFit:
    """Per-grid-point mixed-model fits and the fitted subject trajectories."""

    family: str  # gaussian | poisson | zip
    fitted_mean: np.ndarray  # n x L
    point_params: tuple  # one dict per grid point
    flagged: np.ndarray  # L booleans

    def __post_init__(self):
        object.__setattr__(self, "fitted_mean", _readonly(np.asarray(self.fitted_mean, float)))
        object.__setattr__(self, "flagged", _readonly(np.asarray(self.flagged, bool)))


def _map_slices(fn, L, max_workers):
    if max_workers is None or max_workers <= 1:
        return [fn(l) for l in range(L)]
    with ThreadPoolExecutor(max_workers=max_workers) as ex:
        return list(ex.map(fn, range(L)))


def fit_pointwise_lmm(data: ReplicatedFunctionalDataset, max_workers: int = None) -> PointwiseMixedFit:
    """Gaussian random-intercept fit at every grid point."""
    n, L = data.n, data.L

    def one(l):
        y = data.values[:, :, l]
        obs = data.observed[:, :, l]
        counts = obs.sum(axis=1)
        if np.sum(counts > 0) < 2 or not np.any(counts >= 2):
            # Too sparse for variance components: per-subject means.
            sums = np.where(obs, y, 0.0).sum(axis=1)
            ybar = np.divide(sums, counts, out=np.zeros(n), where=counts > 0)
            fill = ybar[counts > 0].mean() if np.any(counts > 0) else 0.0
            fitted = np.where(counts > 0, ybar, fill)
            return fitted, {"alpha0": float(fill), "sigma_a2": 0.0, "sigma_e2": 0.0}, True
        fit = fit_random_intercept(y, obs)
        params = {"alpha0": fit.alpha0, "sigma_a2": fit.sigma_a2, "sigma_e2": fit.sigma_e2}
        return fit.xhat, params, fit.degenerate

    results = _map_slices(one, L, max_workers)
    fitted = np.column_stack([r[0] for r in results])
    return PointwiseMixedFit("gaussian", fitted, tuple(r[1] for r in results),
                             np.array([r[2] for r in results]))


# -- Poisson GLMM helpers ----------------------------------------------------


def _poisson_marginal_ll(beta0, log_sigma, s, m):
    """Marginal log-likelihood (up to the factorial constant) of the
    intercept-only Poisson GLMM, via Gauss-Hermite quadrature.

    s, m: per-subject sums and observation counts.
    """
    sigma = math.exp(log_sigma)
    b = math.sqrt(2.0) * sigma * _gh_x  # (Q,)
    eta = beta0 + b
    # per subject per node: s*(beta0+b) - m*exp(beta0+b)
    mat = s[:, None] * eta[None, :] - m[:, None] * np.exp(eta)[None, :]
    return float(np.sum(special.logsumexp(mat + _gh_logw[None, :], axis=1)))


def _poisson_posterior_modes(beta0, sigma, s, m):
    """Newton iterations for per-subject posterior modes (concave objective)."""
    if sigma <= 1e-8:
        return np.zeros(s.shape)
    b = np.zeros(s.shape)
    inv_s2 = 1.0 / sigma**2
    for _ in range(50):
        lam = np.exp(np.clip(beta0 + b, -700, 50))
        grad = s - m * lam - b * inv_s2
        hess = -m * lam - inv_s2
        step = grad / hess
        b = b - np.clip(step, -2.0, 2.0)
        if np.max(np.abs(step)) < 1e-12:
            break
    return b


def fit_pointwise_pmm(data: ReplicatedFunctionalDataset, max_workers: int = None) -> PointwiseMixedFit:
    """Poisson random-intercept GLMM at every grid point.

    log E[W | b_i] = beta0 + b_i with b_i ~ N(0, sigma_b^2), fit by ML with
    fixed-node Gauss-Hermite quadrature; fitted means use posterior modes.
    """
    n, L = data.n, data.L

    def one(l):
        y = data.values[:, :, l]
        obs = data.observed[:, :, l]
        s = np.where(obs, y, 0.0).sum(axis=1)
        m = obs.sum(axis=1).astype(float)
        if s.sum() == 0:
            return np.full(n, MEAN_FLOOR), {"beta0": math.log(MEAN_FLOOR), "sigma_b2": 0.0}, True
        mean0 = s.sum() / max(m.sum(), 1.0)
        x0 = np.array([math.log(max(mean0, 1e-4)), math.log(0.5)])
        res = optimize.minimize(
            lambda th: -_poisson_marginal_ll(th[0], th[1], s, m),
            x0, method="L-BFGS-B", bounds=[(-25.0, 25.0), (-8.0, 3.0)],
            options={"ftol": 1e-14, "gtol": 1e-10, "maxiter": 500})
        beta0, log_sigma = res.x
        sigma = math.exp(log_sigma)
        b = _poisson_posterior_modes(beta0, sigma, s, m)
        fitted = np.maximum(np.exp(beta0 + b), MEAN_FLOOR)
        return fitted, {"beta0": float(beta0), "sigma_b2": float(sigma**2)}, not res.success

    results = _map_slices(one, L, max_workers)
    fitted = np.column_stack([r[0] for r in results])
    return PointwiseMixedFit("poisson", fitted, tuple(r[1] for r in results),
                             np.array([r[2] for r in results]))


# -- ZIP GLMM ----------------------------------------------------------------


def _zip_node_ll(pi, beta0, sigma, z, npos, spos):
    """Per-subject, per-node conditional log-likelihoods of the ZIP mixture.

    z: observed zero counts; npos, spos: count and sum of positive values.
    Factorial terms are omitted (constant in all parameters).
    """
    b = math.sqrt(2.0) * sigma * _gh_x
    eta = beta0 + b
    lam = np.exp(np.clip(eta, -700, 50))
    log_zero = np.log(pi + (1.0 - pi) * np.exp(-lam))  # (Q,)
    log1mpi = math.log1p(-pi) if pi < 1 else -np.inf
    return (z[:, None] * log_zero[None, :]
            + npos[:, None] * (log1mpi - lam[None, :])
            + spos[:, None] * eta[None, :])


def _zip_marginal_ll(pi, beta0, log_sigma, z, npos, spos):
    mat = _zip_node_ll(pi, beta0, math.exp(log_sigma), z, npos, spos)
    return float(np.sum(special.logsumexp(mat + _gh_logw[None, :], axis=1)))


def fit_pointwise_zipmm(data: ReplicatedFunctionalDataset, pi_cap: float = 0.99,
                        max_iter: int = 100, tol: float = 1e-7,
                        max_workers: int = None) -> PointwiseMixedFit:
    """Zero-inflated Poisson mixed model at every grid point.

    EM over the latent structural-zero indicators: the E-step computes
    posterior zero-origin probabilities at the quadrature nodes, the M-step
    updates the shared zero probability in closed form and refreshes the
    Poisson GLMM parameters by direct ascent of the quadrature likelihood.
    Both steps are ascent steps, so the observed-data likelihood never
    decreases. Fitted means are the conditional (valid-device) means
    exp(beta0 + b_i) at the posterior modes.
    """
    n, L = data.n, data.L

    def one(l):
        y = data.values[:, :, l]
        obs = data.observed[:, :, l]
        pos = obs & (y > 0)
        z = (obs & (y == 0)).sum(axis=1).astype(float)
        npos = pos.sum(axis=1).astype(float)
        spos = np.where(pos, y, 0.0).sum(axis=1)
        ntot = z.sum() + npos.sum()
        if npos.sum() == 0:
            return (np.full(n, MEAN_FLOOR),
                    {"beta0": math.log(MEAN_FLOOR), "sigma_b2": 0.0, "pi": pi_cap}, True)

        mean_pos = spos.sum() / npos.sum()
        pi = min(pi_cap, 0.5 * float(z.sum() / max(ntot, 1.0)))
        theta = np.array([math.log(max(mean_pos, 1e-4)), math.log(0.5)])
        ll = _zip_marginal_ll(pi, theta[0], theta[1], z, npos, spos)
        trace = [ll]
        converged = False
        for _ in range(max_iter):
            # M-step for (beta0, log sigma): direct ascent from current point.
            res = optimize.minimize(
                lambda th: -_zip_marginal_ll(pi, th[0], th[1], z, npos, spos),
                theta, method="L-BFGS-B", bounds=[(-25.0, 25.0), (-8.0, 3.0)],
                options={"ftol": 1e-14, "gtol": 1e-10, "maxiter": 500})
            if -res.fun >= ll - 1e-10:
                theta = res.x
            # E-step + exact M-step for pi over [0, pi_cap].
            sigma = math.exp(theta[1])
            cond = _zip_node_ll(pi, theta[0], sigma, z, npos, spos)
            logw = cond + _gh_logw[None, :]
            omega = np.exp(logw - special.logsumexp(logw, axis=1, keepdims=True))
            lam = np.exp(np.clip(theta[0] + math.sqrt(2.0) * sigma * _gh_x, -700, 50))
            with np.errstate(divide="ignore"):
                r = pi / (pi + (1.0 - pi) * np.exp(-lam)) if pi > 0 else np.zeros(GH_NODES)
            expected_structural = float(np.sum(z[:, None] * omega * r[None, :]))
            pi_new = min(pi_cap, expected_structural / ntot)
            ll_new = _zip_marginal_ll(pi_new, theta[0], theta[1], z, npos, spos)
            done = abs(pi_new - pi) < tol and ll_new - ll < tol * (1.0 + abs(ll))
            pi, ll = pi_new, ll_new
            trace.append(ll)
            if done:
                converged = True
                break
        b = _zip_posterior_modes(pi, theta[0], math.exp(theta[1]), z, npos, spos)
        fitted = np.maximum(np.exp(theta[0] + b), MEAN_FLOOR)
        return (fitted,
                {"beta0": float(theta[0]), "sigma_b2": float(math.exp(theta[1]) ** 2),
                 "pi": float(pi), "loglik_trace": tuple(trace)}, not converged)

    results = _map_slices(one, L, max_workers)
    fitted = np.column_stack([r[0] for r in results])
    return PointwiseMixedFit("zip", fitted, tuple(r[1] for r in results),
                             np.array([r[2] for r in results]))


def _zip_posterior_modes(pi, beta0, sigma, z, npos, spos):
    """Grid-then-refine 1-D posterior modes under the ZIP mixture."""
    if sigma <= 1e-8:
        return np.zeros(z.shape)
    grid = np.linspace(-6.0 * sigma, 6.0 * sigma, 241)
    lam = np.exp(np.clip(beta0 + grid, -700, 50))
    log_zero = np.log(pi + (1.0 - pi) * np.exp(-lam)) if pi > 0 else -lam
    obj = (z[:, None] * log_zero[None, :]
           + spos[:, None] * (beta0 + grid)[None, :]
           - npos[:, None] * lam[None, :]
           - 0.5 * (grid / sigma) ** 2)
    best = np.argmax(obj, axis=1)
    # One golden refinement pass around the winning grid cell.
    lo = grid[np.maximum(best - 1, 0)]
    hi = grid[np.minimum(best + 1, grid.size - 1)]

    def f(b):
        lam = np.exp(np.clip(beta0 + b, -700, 50))
        lz = np.log(pi + (1.0 - pi) * np.exp(-lam)) if pi > 0 else -lam
        return z * lz + spos * (beta0 + b) - npos * lam - 0.5 * (b / sigma) ** 2

    inv = (math.sqrt(5) - 1) / 2
    for _ in range(30):
        x1 = hi - inv * (hi - lo)
        x2 = lo + inv * (hi - lo)
        take = f(x1) < f(x2)
        lo = np.where(take, x1, lo)
        hi = np.where(take, hi, x2)
    return 0.5 * (lo + hi)
