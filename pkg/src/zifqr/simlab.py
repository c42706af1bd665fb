"""Simulation data-generating process, Monte Carlo harness, and metrics.

The latent curves are a 50-term cosine series with decaying coefficients and
offset 5; surrogates are zero-inflated Poisson draws around the latent curve;
outcomes follow the heterogeneous quantile model driven by a shared uniform
draw per subject. The harness runs R independent replicates with
counter-based RNG substreams so every method sees identical data within a
replicate and full runs are bit-reproducible from (scenario, seed).
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .basis import BSPLINE_CUBIC, cosine_eval, make_basis, project
from .core import (
    InvalidArgumentError,
    ReplicatedFunctionalDataset,
    RunConfig,
    ScalarCovariates,
    Segmentation,
    TimeGrid,
    build_grid,
    substream,
)
from .quantreg import fit_joint, fit_separate_grid
from .zicorrect import (
    ZeroInflationProfile,
    average_estimator,
    be_me,
    be_zime,
    naive_estimator,
    oracle_estimator,
    plmm_estimator,
    ppmm_estimator,
    pzipmm_estimator,
)

HALF_SINE = "half_sine"
FULL_SINE = "full_sine"

# Benchmark default: one cubic B-spline basis shared by the correction and
# regression stages. The two sizes may be decoupled per MethodSpec; stage two
# always projects the corrected curves onto the regression basis, which
# reduces to reusing the correction coefficients when the sizes agree.
DEFAULT_CORRECTION_K = 4
DEFAULT_REGRESSION_K = 4
DEFAULT_ESTIMATION_K = DEFAULT_CORRECTION_K

# RNG substream stages within a replicate.
_S_PI, _S_X, _S_W, _S_Z, _S_Y = range(5)

_PIECEWISE_BOUNDARIES = {
    1: (0.0, 0.5, 1.0),
    2: (0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
    3: (0.0, 0.1, 0.6, 1.0),
}


@dataclass(frozen=True)
class ConstantPi:
    """Subject-specific, time-constant zero inflation pi_i ~ U(pi0 +/- pidelta)."""

    pi0: float
    pidelta: float = 0.0

    def __post_init__(self):
        lo, hi = self.pi0 - self.pidelta, self.pi0 + self.pidelta
        if lo < 0 or hi >= 1:
            raise InvalidArgumentError("pi0 +/- pidelta must stay inside [0, 1)")


@dataclass(frozen=True)
class PiecewisePi:
    """Piecewise-constant layouts alternating pi0 and 1 - pi0."""

    case: int
    pi0: float

    def __post_init__(self):
        if self.case not in _PIECEWISE_BOUNDARIES:
            raise InvalidArgumentError(f"unknown piecewise case {self.case}")
        if not 0 < self.pi0 < 1:
            raise InvalidArgumentError("pi0 must lie in (0, 1)")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one simulation scenario."""

    n: int = 100
    L: int = 100
    J: int = 5
    R: int = 100
    beta_shape: str = HALF_SINE
    eta_beta: int = 0
    eta_eps: int = 0
    sigma: float = 0.1
    pi_mode: object = field(default_factory=lambda: ConstantPi(0.3, 0.0))
    theta: tuple = (0.5, 0.6)
    sigma_z: float = 0.5
    p_z: float = 0.6
    taus: tuple = (0.25, 0.5, 0.75)
    K_true: int = 50
    scenario_id: str = "scenario"

    def __post_init__(self):
        if self.beta_shape not in (HALF_SINE, FULL_SINE):
            raise InvalidArgumentError(f"unknown beta shape {self.beta_shape!r}")
        if self.eta_beta not in (0, 1) or self.eta_eps not in (0, 1):
            raise InvalidArgumentError("heterogeneity switches must be 0 or 1")
        if min(self.n, self.L, self.J, self.R, self.K_true) < 1:
            raise InvalidArgumentError("n, L, J, R, K_true must be positive")
        taus = tuple(float(t) for t in self.taus)
        if any(not 0 < t < 1 for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
            raise InvalidArgumentError("taus must be increasing in (0,1)")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))


@dataclass(frozen=True)
class MethodSpec:
    """Stage-one estimator choice plus its estimation settings.

    ``correction_K`` sizes the basis used by the correction step (be-zime and
    be-me); ``K`` sizes the regression basis onto which the corrected curves
    are projected for stage two.
    """

    name: str  # naive|average|p-lmm|p-pmm|p-zipmm|be-me|be-zime|oracle
    label: str = None
    K: int = DEFAULT_REGRESSION_K
    correction_K: int = DEFAULT_CORRECTION_K
    basis_kind: str = BSPLINE_CUBIC
    segments: int = 1  # working segment count for be-zime

    def __post_init__(self):
        if self.label is None:
            object.__setattr__(self, "label", self.name)


# ---------------------------------------------------------------------------
# Data-generating process
# ---------------------------------------------------------------------------


def beta0_curve(shape: str, points: np.ndarray) -> np.ndarray:
    if shape == HALF_SINE:
        return 0.5 * np.sin(np.pi * points)
    if shape == FULL_SINE:
        return np.sin(2.0 * np.pi * points)
    raise InvalidArgumentError(f"unknown beta shape {shape!r}")


def beta_true(config: ScenarioConfig, grid: TimeGrid, taus=None) -> np.ndarray:
    """True coefficient surface (H x L): {1 + eta_beta 0.2(tau-0.5)} beta0(t)."""
    taus = np.asarray(config.taus if taus is None else taus, float)
    base = beta0_curve(config.beta_shape, grid.points)
    scale = 1.0 + config.eta_beta * 0.2 * (taus - 0.5)
    return scale[:, None] * base[None, :]


def series_decay(k_terms: int) -> np.ndarray:
    """Alternating decay weights zeta_k = (-1)^{k+1} / k of the latent series."""
    ks = np.arange(1, k_terms + 1)
    return (-1.0) ** (ks + 1) / ks


def gen_latent_X(n: int, grid: TimeGrid, rng: np.random.Generator,
                 k_terms: int = 50) -> np.ndarray:
    """Latent curves: sum_k xi_ik zeta_k phi_k(t) + 5 with xi ~ U(-sqrt3, sqrt3)
    and zeta_k = (-1)^{k+1} / k on the cosine family."""
    xi = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(n, k_terms))
    return (xi * series_decay(k_terms)) @ cosine_eval(k_terms, grid.points) + 5.0


def gen_pi_profile(config: ScenarioConfig, n: int,
                   rng: np.random.Generator) -> ZeroInflationProfile:
    """True zero-inflation profile for the scenario."""
    mode = config.pi_mode
    if isinstance(mode, ConstantPi):
        seg = Segmentation(np.array([0.0, 1.0]))
        pi = rng.uniform(mode.pi0 - mode.pidelta, mode.pi0 + mode.pidelta, size=(n, 1))
        return ZeroInflationProfile(seg, np.clip(pi, 0.0, 1.0 - 1e-12))
    if isinstance(mode, PiecewisePi):
        bounds = np.asarray(_PIECEWISE_BOUNDARIES[mode.case])
        seg = Segmentation(bounds)
        vals = np.array([mode.pi0 if m % 2 == 0 else 1.0 - mode.pi0
                         for m in range(seg.M)])
        return ZeroInflationProfile(seg, np.tile(vals, (n, 1)))
    raise InvalidArgumentError("invalid case id")


def gen_surrogates(X: np.ndarray, J: int, pi_profile: ZeroInflationProfile,
                   grid: TimeGrid, rng: np.random.Generator) -> ReplicatedFunctionalDataset:
    """Zero-inflated Poisson replicates: W = V * Poisson(X), V ~ Bern(1-pi)."""
    X = np.asarray(X, float)
    if np.any(X <= 0):
        warnings.warn("latent curve not strictly positive; clipping at 0.05")
        X = np.maximum(X, 0.05)
    n, L = X.shape
    pi_curves = pi_profile.as_curves(grid)
    valid = rng.random((n, J, L)) >= pi_curves[:, None, :]
    counts = rng.poisson(np.broadcast_to(X[:, None, :], (n, J, L))).astype(float)
    W = np.where(valid, counts, 0.0)
    return ReplicatedFunctionalDataset(grid, W, np.ones_like(W, bool))


def gen_scalar_covariates(n: int, config: ScenarioConfig,
                          rng: np.random.Generator) -> ScalarCovariates:
    z1 = rng.normal(1.0, config.sigma_z, size=n)
    z2 = (rng.random(n) < config.p_z).astype(float)
    Z = np.column_stack([np.ones(n), z1, z2])
    return ScalarCovariates(Z, ("intercept", "z1", "z2"))


def gen_outcome(X: np.ndarray, Z: ScalarCovariates, config: ScenarioConfig,
                rng: np.random.Generator, grid: TimeGrid) -> np.ndarray:
    """Heterogeneous outcome model driven by one uniform draw per subject.

    beta_i = {1 + eta_beta 0.2(U_i - 0.5)} beta0, eps_i = sigma {1 + eta_eps
    0.2(U_i - 0.5)} PhiInv(U_i); the integral uses the estimation quadrature.
    """
    U = rng.uniform(size=X.shape[0])
    h = 0.2 * (U - 0.5)
    base = (X * grid.trapezoid_weights()) @ beta0_curve(config.beta_shape, grid.points)
    eps = config.sigma * (1.0 + config.eta_eps * h) * ndtri(U)
    scalars = Z.Z[:, 1] * config.theta[0] + Z.Z[:, 2] * config.theta[1]
    return (1.0 + config.eta_beta * h) * base + scalars + eps


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaMetrics:
    abias2: np.ndarray  # H
    avar: np.ndarray  # H
    mise: np.ndarray  # H
    single_replicate: bool = False


def compute_beta_metrics(estimates: np.ndarray, truth: np.ndarray) -> BetaMetrics:
    """Average squared bias, average variance, and their sum over the grid.

    estimates: R x H x L stacked fits; truth: H x L.
    """
    est = np.asarray(estimates, float)
    truth = np.asarray(truth, float)
    if est.ndim != 3 or est.shape[1:] != truth.shape:
        raise InvalidArgumentError("estimates must be R x H x L matching truth")
    if est.shape[0] < 2:
        raise InvalidArgumentError("need R >= 2 replicates")
    mean = est.mean(axis=0)
    abias2 = np.mean((mean - truth) ** 2, axis=1)
    avar = np.mean((est - mean) ** 2, axis=(0, 2))
    return BetaMetrics(abias2, avar, abias2 + avar)


def compute_x_mise(x_hat: np.ndarray, x_true: np.ndarray) -> float:
    """(nL)^{-1} double sum of squared curve errors."""
    x_hat = np.asarray(x_hat, float)
    x_true = np.asarray(x_true, float)
    if x_hat.shape != x_true.shape:
        raise InvalidArgumentError("shape mismatch")
    return float(np.mean((x_hat - x_true) ** 2))


def compute_pi_metrics(pi_hat: ZeroInflationProfile,
                       pi_true: ZeroInflationProfile,
                       segmentation_hat: Segmentation = None):
    """Exact integrated squared errors of the zero-inflation estimate.

    Returns (mse, mse_dagger) averaged over subjects: the first integrates
    (pi_hat - pi_true)^2, the second compares pi_hat against the true profile
    averaged over each segment of the working segmentation (by default the
    estimate's own). All profiles are piecewise constant, so both integrals
    are computed exactly on the merged boundary cells.
    """
    seg_hat = pi_hat.segmentation
    seg_true = pi_true.segmentation
    seg_work = seg_hat if segmentation_hat is None else segmentation_hat
    edges = np.union1d(np.union1d(seg_hat.boundaries, seg_true.boundaries),
                       seg_work.boundaries)
    mids = 0.5 * (edges[:-1] + edges[1:])
    lens = np.diff(edges)
    hat_vals = pi_hat.pi[:, seg_hat.segment_of(mids)]  # n x cells
    true_vals = pi_true.pi[:, seg_true.segment_of(mids)]
    mse = float(np.mean(np.sum(lens * (hat_vals - true_vals) ** 2, axis=1)))

    cell_seg = seg_work.segment_of(mids)
    tilde = np.zeros_like(true_vals)
    for m in range(seg_work.M):
        sel = cell_seg == m
        seg_mean = (true_vals[:, sel] * lens[sel]).sum(axis=1) / seg_work.lengths[m]
        tilde[:, sel] = seg_mean[:, None]
    mse_dagger = float(np.mean(np.sum(lens * (hat_vals - tilde) ** 2, axis=1)))
    return mse, mse_dagger


# ---------------------------------------------------------------------------
# Replication harness
# ---------------------------------------------------------------------------


@dataclass
class MetricsReport:
    """Aggregated benchmark results; ``mise == abias2 + avar`` by construction."""

    scenario_id: str
    taus: tuple
    R: int
    seed: int
    methods: tuple
    beta_joint: dict
    beta_separate: dict
    improvement_ratio: dict
    mise_x_mean: dict
    mise_x_sd: dict
    raw_mise_x: dict
    mse_pi_mean: dict
    mse_pi_sd: dict
    mse_pi_dagger_mean: dict
    mse_pi_dagger_sd: dict
    raw_mse_pi: dict
    raw_mse_pi_dagger: dict
    failures: dict
    replicates_used: dict

    def rows(self):
        """Aggregate records in fixed column order:
        (scenario_id, method, tau, metric, value, R, seed)."""
        out = []

        def add(method, tau, metric, value):
            out.append((self.scenario_id, method, tau, metric, value, self.R, self.seed))

        for label in self.methods:
            bj = self.beta_joint.get(label)
            bs = self.beta_separate.get(label)
            for h, tau in enumerate(self.taus):
                if bj is not None:
                    add(label, tau, "abias2", bj.abias2[h])
                    add(label, tau, "avar", bj.avar[h])
                    add(label, tau, "mise", bj.mise[h])
                if bs is not None:
                    add(label, tau, "abias2_separate", bs.abias2[h])
                    add(label, tau, "avar_separate", bs.avar[h])
                    add(label, tau, "mise_separate", bs.mise[h])
                if label in self.improvement_ratio:
                    add(label, tau, "improvement_ratio", self.improvement_ratio[label][h])
            if label in self.mise_x_mean:
                add(label, "", "mise_x_mean", self.mise_x_mean[label])
                add(label, "", "mise_x_sd", self.mise_x_sd[label])
            if label in self.mse_pi_mean:
                add(label, "", "mse_pi_mean", self.mse_pi_mean[label])
                add(label, "", "mse_pi_sd", self.mse_pi_sd[label])
                add(label, "", "mse_pi_dagger_mean", self.mse_pi_dagger_mean[label])
                add(label, "", "mse_pi_dagger_sd", self.mse_pi_dagger_sd[label])
            add(label, "", "failures", self.failures.get(label, 0))
            add(label, "", "replicates_used", self.replicates_used.get(label, 0))
        return out

    def replicate_rows(self):
        """Raw per-replicate records: (scenario_id, method, replicate, metric, value)."""
        out = []
        for label in self.methods:
            for metric, store in (("mise_x", self.raw_mise_x),
                                  ("mse_pi", self.raw_mse_pi),
                                  ("mse_pi_dagger", self.raw_mse_pi_dagger)):
                for r, v in enumerate(store.get(label, [])):
                    if np.isfinite(v):
                        out.append((self.scenario_id, label, r, metric, v))
        return out


def generate_replicate(scenario: ScenarioConfig, seed: int, r: int, grid: TimeGrid):
    """Draw one replicate's data from its dedicated substreams."""
    pi_profile = gen_pi_profile(scenario, scenario.n, substream(seed, r, _S_PI))
    X = gen_latent_X(scenario.n, grid, substream(seed, r, _S_X), scenario.K_true)
    data = gen_surrogates(X, scenario.J, pi_profile, grid, substream(seed, r, _S_W))
    Z = gen_scalar_covariates(scenario.n, scenario, substream(seed, r, _S_Z))
    Y = gen_outcome(X, Z, scenario, substream(seed, r, _S_Y), grid)
    return pi_profile, X, data, Z, Y


def _run_stage1(spec: MethodSpec, data, X, basis, run_config):
    """Dispatch a stage-one estimator; returns (corrected, profile-or-None)."""
    name = spec.name
    if name == "be-zime":
        seg = Segmentation.equal(spec.segments)
        return be_zime(data, basis, seg, run_config)
    if name == "be-me":
        return be_me(data, basis, run_config), None
    if name == "naive":
        return naive_estimator(data, basis), None
    if name == "average":
        return average_estimator(data, basis), None
    if name == "oracle":
        return oracle_estimator(X, basis), None
    if name == "p-lmm":
        return plmm_estimator(data, basis), None
    if name == "p-pmm":
        return ppmm_estimator(data, basis), None
    if name == "p-zipmm":
        return pzipmm_estimator(data, basis, pi_cap=run_config.pi_cap), None
    raise InvalidArgumentError(f"unknown method {name!r}")


def _replicate_task(args):
    scenario, methods, seed, r = args
    grid = build_grid(scenario.L)
    bases = {}

    def get_basis(kind, K):
        key = (kind, K)
        if key not in bases:
            bases[key] = make_basis(kind, K, grid)
        return bases[key]

    run_config = RunConfig(seed=seed, tau_levels=scenario.taus)
    pi_profile, X, data, Z, Y = generate_replicate(scenario, seed, r, grid)
    out = {}
    for spec in methods:
        try:
            basis1 = get_basis(spec.basis_kind, spec.correction_K)
            basis2 = get_basis(spec.basis_kind, spec.K)
            corrected, prof = _run_stage1(spec, data, X, basis1, run_config)
            xhat2 = project(corrected.curves, basis2)
            joint = fit_joint(Y, xhat2, Z.Z, scenario.taus, basis=basis2)
            sep = fit_separate_grid(Y, xhat2, Z.Z, scenario.taus, basis=basis2)
            rec = {
                "beta_joint": joint.beta_curves,
                "beta_separate": sep.beta_curves,
                "mise_x": compute_x_mise(corrected.curves, X),
            }
            if prof is not None:
                mse, dag = compute_pi_metrics(prof, pi_profile)
                rec["mse_pi"] = mse
                rec["mse_pi_dagger"] = dag
            out[spec.label] = rec
        except Exception as exc:  # noqa: BLE001 - per-method isolation
            out[spec.label] = {"error": repr(exc)}
    return out


def run_replications(scenario: ScenarioConfig, methods, R: int = None,
                     seed: int = 0, threads: int = 1) -> MetricsReport:
    """Run the benchmark: R replicates, shared data per replicate, aggregated
    metrics per (method, tau). Failed method-replicates are excluded from that
    method's aggregates and counted."""
    R = scenario.R if R is None else int(R)
    if R < 1:
        raise InvalidArgumentError("R must be >= 1")
    methods = tuple(methods)
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise InvalidArgumentError("method labels must be distinct")

    tasks = [(scenario, methods, seed, r) for r in range(R)]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            per_rep = list(ex.map(_replicate_task, tasks, chunksize=1))
    else:
        per_rep = [_replicate_task(t) for t in tasks]

    grid = build_grid(scenario.L)
    truth = beta_true(scenario, grid)
    H = len(scenario.taus)

    beta_joint, beta_sep, improvement = {}, {}, {}
    mise_x_mean, mise_x_sd, raw_mise_x = {}, {}, {}
    mse_pi_mean, mse_pi_sd = {}, {}
    mse_dag_mean, mse_dag_sd = {}, {}
    raw_mse_pi, raw_mse_dag = {}, {}
    failures, used = {}, {}

    for label in labels:
        recs = [per_rep[r][label] for r in range(R)]
        ok = [rec for rec in recs if "error" not in rec]
        failures[label] = R - len(ok)
        used[label] = len(ok)
        if not ok:
            continue
        raw_mise_x[label] = np.array([rec["mise_x"] for rec in ok])
        mise_x_mean[label] = float(np.mean(raw_mise_x[label]))
        mise_x_sd[label] = float(np.std(raw_mise_x[label], ddof=1)) if len(ok) > 1 else 0.0
        if "mse_pi" in ok[0]:
            raw_mse_pi[label] = np.array([rec["mse_pi"] for rec in ok])
            raw_mse_dag[label] = np.array([rec["mse_pi_dagger"] for rec in ok])
            mse_pi_mean[label] = float(np.mean(raw_mse_pi[label]))
            mse_pi_sd[label] = float(np.std(raw_mse_pi[label], ddof=1)) if len(ok) > 1 else 0.0
            mse_dag_mean[label] = float(np.mean(raw_mse_dag[label]))
            mse_dag_sd[label] = float(np.std(raw_mse_dag[label], ddof=1)) if len(ok) > 1 else 0.0
        est_j = np.stack([rec["beta_joint"] for rec in ok])
        est_s = np.stack([rec["beta_separate"] for rec in ok])
        if len(ok) == 1:
            # Single replicate: variance undefined, reported as 0 and flagged.
            bj = BetaMetrics(np.mean((est_j[0] - truth) ** 2, axis=1),
                             np.zeros(H), np.mean((est_j[0] - truth) ** 2, axis=1),
                             single_replicate=True)
            bs = BetaMetrics(np.mean((est_s[0] - truth) ** 2, axis=1),
                             np.zeros(H), np.mean((est_s[0] - truth) ** 2, axis=1),
                             single_replicate=True)
        else:
            bj = compute_beta_metrics(est_j, truth)
            bs = compute_beta_metrics(est_s, truth)
        beta_joint[label] = bj
        beta_sep[label] = bs
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(bs.mise > 0, (bs.mise - bj.mise) / bs.mise, 0.0)
        improvement[label] = ratio

    return MetricsReport(
        scenario_id=scenario.scenario_id, taus=scenario.taus, R=R, seed=seed,
        methods=tuple(labels), beta_joint=beta_joint, beta_separate=beta_sep,
        improvement_ratio=improvement, mise_x_mean=mise_x_mean,
        mise_x_sd=mise_x_sd, raw_mise_x=raw_mise_x, mse_pi_mean=mse_pi_mean,
        mse_pi_sd=mse_pi_sd, mse_pi_dagger_mean=mse_dag_mean,
        mse_pi_dagger_sd=mse_dag_sd, raw_mse_pi=raw_mse_pi,
        raw_mse_pi_dagger=raw_mse_dag, failures=failures, replicates_used=used)
