"""Stage-one estimators for zero-inflated, error-prone replicated curves.

The centrepiece is the alternating estimator: inflate observed counts by the
working zero-inflation probability, project onto a basis, shrink the
per-coefficient replicates through a random-intercept model, reconstruct the
latent curves, then re-estimate the segment-wise zero-inflation probabilities
by maximum likelihood, repeating to convergence. The simpler competitors
(first replicate, replicate average, measurement-error-only pass, pointwise
mixed models, and the oracle that sees the truth) share the same output type
so stage two treats them uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .basis import BasisSystem, masked_quad_weights, project, reconstruct
from .core import (
    DegenerateInputError,
    InvalidArgumentError,
    ReplicatedFunctionalDataset,
    RunConfig,
    Segmentation,
    _readonly,
)
from . import mixedmodels

# Reconstructed curves may dip <= 0; the ZIP likelihood needs a positive mean.
# The floor applies only inside the likelihood, never to stored curves.
X_FLOOR = 1e-6

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroInflationProfile:
    """Per-subject piecewise-constant zero-inflation probabilities."""

    segmentation: Segmentation
    pi: np.ndarray  # n x M
    flagged: np.ndarray = None  # n x M subject-segments with no data

    def __post_init__(self):
        pi = np.asarray(self.pi, float)
        if pi.ndim != 2 or pi.shape[1] != self.segmentation.M:
            raise InvalidArgumentError("pi must be n x M for the segmentation")
        if np.any(pi < 0) or np.any(pi >= 1):
            raise InvalidArgumentError("zero-inflation probabilities must lie in [0, 1)")
        object.__setattr__(self, "pi", _readonly(pi))
        if self.flagged is not None:
            object.__setattr__(self, "flagged", _readonly(np.asarray(self.flagged, bool)))

    @property
    def n(self) -> int:
        return self.pi.shape[0]

    def as_function(self, i: int, t) -> np.ndarray:
        return self.pi[i, self.segmentation.segment_of(t)]

    def as_curves(self, grid) -> np.ndarray:
        """n x L matrix of pi_i(t_l)."""
        return self.pi[:, self.segmentation.segment_of(grid.points)]


@dataclass(frozen=True)
class CorrectedCovariate:
    """Stage-one output: coefficient vectors and reconstructed curves."""

    coeffs: np.ndarray  # n x K
    curves: np.ndarray  # n x L
    method_tag: str
    iterations: int = 1
    converged: bool = True
    pi_deltas: tuple = ()  # per-iteration mean absolute pi change

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _readonly(np.asarray(self.coeffs, float)))
        object.__setattr__(self, "curves", _readonly(np.asarray(self.curves, float)))


# ---------------------------------------------------------------------------
# ZIP likelihood
# ---------------------------------------------------------------------------


def zip_loglik_point(w, x: float, pi: float) -> float:
    """Log-likelihood of one observed count under the ZIP mixture.

    log[pi + (1-pi) e^{-x}] when w == 0, otherwise
    log(1-pi) + w log x - x - log(w!).
    """
    if x <= 0:
        raise InvalidArgumentError("Poisson mean must be positive")
    if not 0.0 <= pi < 1.0:
        raise InvalidArgumentError("pi must lie in [0, 1)")
    if w < 0 or w != int(w):
        raise InvalidArgumentError("count must be a non-negative integer")
    if w == 0:
        return math.log(pi + (1.0 - pi) * math.exp(-x))
    return (math.log1p(-pi) + w * math.log(x) - x
            - float(special.gammaln(w + 1.0)))


def _segment_pi_loglik(pi, zero_counts, exp_neg_x, n_pos):
    """Vectorized pi-dependent part of the segment log-likelihood.

    pi: (n,); zero_counts, exp_neg_x: (n, Lm); n_pos: (n,).
    """
    p = pi[:, None]
    with np.errstate(divide="ignore"):
        lz = np.log(p + (1.0 - p) * exp_neg_x)
    return np.sum(zero_counts * lz, axis=1) + n_pos * np.log1p(-pi)


def _golden_max_pi(zero_counts, exp_neg_x, n_pos, pi_cap, iters=35):
    """Golden-section maximizer of the segment likelihood over [0, pi_cap].

    The log-likelihood is concave in pi, so the search converges to the
    global maximum; exact endpoint candidates are kept to resolve boundary
    solutions (no zeros -> 0, all zeros -> pi_cap).
    """
    n = n_pos.shape[0]
    lo = np.zeros(n)
    hi = np.full(n, pi_cap)

    def f(p):
        return _segment_pi_loglik(p, zero_counts, exp_neg_x, n_pos)

    for _ in range(iters):
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        take = f(x1) < f(x2)
        lo = np.where(take, x1, lo)
        hi = np.where(take, hi, x2)
    mid = 0.5 * (lo + hi)
    cand = np.stack([np.zeros(n), mid, np.full(n, pi_cap)])
    vals = np.stack([f(c) for c in cand])
    return cand[np.argmax(vals, axis=0), np.arange(n)]


def estimate_pi_segment(counts: np.ndarray, observed: np.ndarray,
                        xhat_segment: np.ndarray, pi_cap: float = 0.99) -> float:
    """Segment-wise ML estimate of the zero-inflation probability.

    counts, observed: J x Lm replicate values and mask on the segment's grid
    points; xhat_segment: positive working means at those points.
    """
    counts = np.asarray(counts, float)
    obs = np.asarray(observed, bool)
    x = np.asarray(xhat_segment, float)
    if np.any(x <= 0):
        raise InvalidArgumentError("working means must be positive")
    if not obs.any():
        raise DegenerateInputError("segment has no observed points")
    zero_counts = (obs & (counts == 0)).sum(axis=0, dtype=float)[None, :]
    n_pos = np.array([(obs & (counts > 0)).sum(dtype=float)])
    pi = _golden_max_pi(zero_counts, np.exp(-x)[None, :], n_pos, pi_cap)
    return float(pi[0])


def initial_pi(data: ReplicatedFunctionalDataset,
               segmentation: Segmentation) -> ZeroInflationProfile:
    """Empirical zero fraction per subject-segment (the naive initializer)."""
    segmentation.validate_against(data.grid)
    obs = data.observed
    zeros = obs & (data.values == 0)
    seg_idx = segmentation.point_indices(data.grid)
    n, M = data.n, segmentation.M
    pi = np.zeros((n, M))
    flagged = np.zeros((n, M), bool)
    for m, idx in enumerate(seg_idx):
        nz = zeros[:, :, idx].sum(axis=(1, 2), dtype=float)
        nobs = obs[:, :, idx].sum(axis=(1, 2), dtype=float)
        has = nobs > 0
        pi[has, m] = nz[has] / nobs[has]
        flagged[:, m] = ~has
    return ZeroInflationProfile(segmentation, np.minimum(pi, 1.0 - 1e-12), flagged)


# ---------------------------------------------------------------------------
# Shared projection + LMM pass
# ---------------------------------------------------------------------------


def _project_replicates(values_masked, obs, basis):
    """Projection scores for every (subject, replicate) curve."""
    if obs.all():
        wphi = basis.quad_weights[:, None] * basis.eval.T  # L x K
        return values_masked @ wphi
    w = masked_quad_weights(basis.grid, obs)
    return (values_masked * w) @ basis.eval.T


def _lmm_correct(wstar, valid_rep):
    """Per-coefficient random-intercept shrinkage: n x J x K -> n x K."""
    n, J, K = wstar.shape
    coeffs = np.empty((n, K))
    mask = None if valid_rep.all() else valid_rep
    for k in range(K):
        fit = mixedmodels.fit_random_intercept(wstar[:, :, k], mask)
        coeffs[:, k] = fit.xhat
    return coeffs


def _basis_lmm_pass(values_masked, obs, valid_rep, basis):
    wstar = _project_replicates(values_masked, obs, basis)
    coeffs = _lmm_correct(wstar, valid_rep)
    return coeffs, reconstruct(coeffs, basis)


# ---------------------------------------------------------------------------
# BE-ZIME and competitors
# ---------------------------------------------------------------------------


def be_zime(data: ReplicatedFunctionalDataset, basis: BasisSystem,
            segmentation: Segmentation, config: RunConfig):
    """Alternating zero-inflation / measurement-error correction.

    Returns the corrected covariate and the final zero-inflation profile.
    Convergence is declared when the mean absolute change of the segment
    probabilities drops below ``config.convergence_tol``.
    """
    segmentation.validate_against(data.grid)
    obs = data.observed
    values = np.where(obs, data.values, 0.0)
    valid_rep = obs.sum(axis=2) >= 2
    seg_of_point = segmentation.segment_of(data.grid.points)
    seg_idx = segmentation.point_indices(data.grid)

    zero_pts = (obs & (values == 0)).sum(axis=1, dtype=float)  # n x L
    pos_seg = np.stack(
        [(obs[:, :, idx] & (values[:, :, idx] > 0)).sum(axis=(1, 2), dtype=float)
         for idx in seg_idx], axis=1)  # n x M
    has_data = np.stack(
        [obs[:, :, idx].any(axis=(1, 2)) for idx in seg_idx], axis=1)  # n x M

    pi = np.minimum(initial_pi(data, segmentation).pi, config.pi_cap)
    coeffs = curves = None
    deltas = []
    converged = False
    iterations = 0
    for _ in range(config.max_iter):
        iterations += 1
        adj = values / (1.0 - pi[:, seg_of_point])[:, None, :]
        coeffs, curves = _basis_lmm_pass(adj, obs, valid_rep, basis)
        xlik = np.maximum(curves, X_FLOOR)
        pi_new = pi.copy()
        for m, idx in enumerate(seg_idx):
            est = _golden_max_pi(zero_pts[:, idx], np.exp(-xlik[:, idx]),
                                 pos_seg[:, m], config.pi_cap)
            pi_new[:, m] = np.where(has_data[:, m], est, pi[:, m])
        delta = float(np.mean(np.abs(pi_new - pi)))
        deltas.append(delta)
        pi = pi_new
        if delta < config.convergence_tol:
            converged = True
            break

    corrected = CorrectedCovariate(coeffs, curves, "be-zime",
                                   iterations=iterations, converged=converged,
                                   pi_deltas=tuple(deltas))
    profile = ZeroInflationProfile(segmentation, pi, ~has_data)
    return corrected, profile


def be_me(data: ReplicatedFunctionalDataset, basis: BasisSystem,
          config: RunConfig = None) -> CorrectedCovariate:
    """Measurement-error-only pass: the alternating estimator with pi fixed
    at zero and no zero-inflation update (a single basis + LMM sweep)."""
    obs = data.observed
    values = np.where(obs, data.values, 0.0)
    valid_rep = obs.sum(axis=2) >= 2
    coeffs, curves = _basis_lmm_pass(values, obs, valid_rep, basis)
    return CorrectedCovariate(coeffs, curves, "be-me")


def naive_estimator(data: ReplicatedFunctionalDataset, basis: BasisSystem) -> CorrectedCovariate:
    """First replicate taken at face value."""
    obs1 = data.observed[:, 0, :]
    curves = np.where(obs1, data.values[:, 0, :], np.nan)
    coeffs = _project_rows(curves, obs1, basis)
    return CorrectedCovariate(coeffs, curves, "naive")


def average_estimator(data: ReplicatedFunctionalDataset, basis: BasisSystem) -> CorrectedCovariate:
    """Mask-aware mean over replicates."""
    obs = data.observed
    cnt = obs.sum(axis=1)
    tot = np.where(obs, data.values, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore"):
        curves = np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)
    coeffs = _project_rows(curves, cnt > 0, basis)
    return CorrectedCovariate(coeffs, curves, "average")


def oracle_estimator(true_X: np.ndarray, basis: BasisSystem) -> CorrectedCovariate:
    """Benchmark that sees the latent curves."""
    true_X = np.asarray(true_X, float)
    coeffs = project(true_X, basis)
    return CorrectedCovariate(coeffs, true_X, "oracle")


def _project_rows(curves, obs, basis):
    coeffs = np.full((curves.shape[0], basis.K), np.nan)
    enough = obs.sum(axis=1) >= 2
    if enough.any():
        coeffs[enough] = project(np.where(obs, curves, 0.0)[enough], basis,
                                 obs[enough])
    return coeffs


def plmm_estimator(data: ReplicatedFunctionalDataset, basis: BasisSystem,
                   max_workers: int = None) -> CorrectedCovariate:
    """Pointwise Gaussian mixed-model trajectories, then basis projection."""
    fit = mixedmodels.fit_pointwise_lmm(data, max_workers=max_workers)
    return CorrectedCovariate(project(fit.fitted_mean, basis), fit.fitted_mean, "p-lmm")


def ppmm_estimator(data: ReplicatedFunctionalDataset, basis: BasisSystem,
                   max_workers: int = None) -> CorrectedCovariate:
    """Pointwise Poisson mixed-model trajectories, then basis projection."""
    fit = mixedmodels.fit_pointwise_pmm(data, max_workers=max_workers)
    return CorrectedCovariate(project(fit.fitted_mean, basis), fit.fitted_mean, "p-pmm")


def pzipmm_estimator(data: ReplicatedFunctionalDataset, basis: BasisSystem,
                     pi_cap: float = 0.99, max_workers: int = None) -> CorrectedCovariate:
    """Pointwise zero-inflated Poisson trajectories, then basis projection."""
    fit = mixedmodels.fit_pointwise_zipmm(data, pi_cap=pi_cap, max_workers=max_workers)
    return CorrectedCovariate(project(fit.fitted_mean, basis), fit.fitted_mean, "p-zipmm")
