"""Acceptance gate: one test per criterion, at the stated tolerances.

The Monte Carlo criteria share two benchmark runs (constant and piecewise
zero inflation) through module-scoped fixtures, all pinned to a single
pre-registered seed. Each test prints one line with the measured quantities
before asserting, so `pytest -v -s tests/test_acceptance.py` shows both the
pass/fail verdict and the numbers behind it.
"""

import itertools
import time

import numpy as np
import pytest

from zifqr import simlab
from zifqr.basis import BSPLINE_CUBIC, COSINE, make_basis, project, reconstruct
from zifqr.core import build_grid, substream
from zifqr.inference import FULL, RADEMACHER, wild_bootstrap_global_test
from zifqr.quantreg import check_loss, fit_separate
from zifqr.zicorrect import estimate_pi_segment
from zifqr.mixedmodels import fit_random_intercept

SEED = 20260810

METHODS = ("naive", "average", "be-me", "be-zime", "oracle")


def _line(tag, text):
    print(f"\n[ACCEPTANCE] {tag}: {text}")


@pytest.fixture(scope="module")
def constant_run():
    scenario = simlab.ScenarioConfig(
        n=100, L=100, J=5, R=100, pi_mode=simlab.ConstantPi(0.3, 0.0),
        beta_shape=simlab.HALF_SINE, sigma=0.1, scenario_id="constant-pi03")
    methods = [simlab.MethodSpec(m) for m in METHODS]
    t0 = time.time()
    report = simlab.run_replications(scenario, methods, R=100, seed=SEED)
    return report, time.time() - t0


@pytest.fixture(scope="module")
def piecewise_run():
    scenario = simlab.ScenarioConfig(
        n=100, L=100, J=5, R=100, pi_mode=simlab.PiecewisePi(1, 0.6),
        beta_shape=simlab.HALF_SINE, sigma=0.1, scenario_id="piecewise-case1")
    methods = [simlab.MethodSpec("be-zime", label="be-zime-m1", segments=1),
               simlab.MethodSpec("be-zime", label="be-zime-m2", segments=2)]
    report = simlab.run_replications(scenario, methods, R=100, seed=SEED)
    return report


def test_ac1_pi_recovery_constant(constant_run):
    report, elapsed = constant_run
    mse = report.mse_pi_mean["be-zime"]
    _line("AC1", f"mean MSE(pi-hat) = {mse:.6g} (band [1.6e-4, 6.5e-4]); "
                 f"benchmark wall time {elapsed:.0f}s (target < 600s)")
    assert 1.6e-4 <= mse <= 6.5e-4
    assert elapsed < 600.0


def test_ac2_latent_curve_recovery(constant_run):
    report, _ = constant_run
    mise = report.mise_x_mean["be-zime"]
    raw = report.raw_mise_x
    ordering = np.mean((raw["be-zime"] < raw["be-me"])
                       & (raw["be-me"] < raw["naive"]))
    _line("AC2", f"MISE(X-hat) be-zime = {mise:.4f} (band [0.33, 0.72]); "
                 f"be-zime < be-me < naive in {100 * ordering:.0f}% of replicates "
                 f"(needs >= 95%); be-me = {report.mise_x_mean['be-me']:.3f}, "
                 f"naive = {report.mise_x_mean['naive']:.3f}")
    assert 0.33 <= mise <= 0.72
    assert ordering >= 0.95


def test_ac3_coefficient_recovery(constant_run):
    report, _ = constant_run
    h = report.taus.index(0.5)
    mise = report.beta_joint["be-zime"].mise[h]
    oracle = report.beta_joint["oracle"].mise[h]
    _line("AC3", f"beta MISE at tau=0.5: be-zime = {mise:.5f} "
                 f"(band [0.003, 0.013]), oracle = {oracle:.5f}, "
                 f"ratio = {mise / oracle:.2f} (needs <= 2)")
    assert 0.003 <= mise <= 0.013
    assert mise <= 2.0 * oracle


def test_ac4_piecewise_robustness(piecewise_run):
    report = piecewise_run
    h = report.taus.index(0.5)
    m1 = report.beta_joint["be-zime-m1"].mise[h]
    m2 = report.beta_joint["be-zime-m2"].mise[h]
    x1 = report.mise_x_mean["be-zime-m1"]
    x2 = report.mise_x_mean["be-zime-m2"]
    _line("AC4", f"beta MISE at tau=0.5: M-hat=2 -> {m2:.5f} (band "
                 f"[0.003, 0.014]); M-hat=1 -> {m1:.5f} (must exceed M-hat=2); "
                 f"X-hat MISE {x1:.3f} (M=1) vs {x2:.3f} (M=2)")
    assert 0.003 <= m2 <= 0.014
    # At the regression size the MISE bands force (K=4), the coarse basis
    # absorbs the M-hat=1 warp, so the beta-level gap is a statistical tie
    # even though the X-hat-level gap is decisive.
    assert m1 > m2


def test_ac5_joint_vs_separate(constant_run):
    report, _ = constant_run
    idx = [report.taus.index(0.25), report.taus.index(0.75)]
    ratio = float(np.mean(report.improvement_ratio["be-zime"][idx]))
    _line("AC5", f"joint-vs-separate improvement for be-zime averaged over "
                 f"tau in {{0.25, 0.75}} = {100 * ratio:.1f}% (needs > 5%)")
    # With the exact-LP non-crossing joint fitter, improvement > 5% requires
    # a regression basis size whose variance leaves the MISE bands used by
    # the other criteria; this threshold is expected to fail honestly.
    assert ratio > 0.05


class TestAC6OracleEquivalences:
    def test_zip_segment_mle_vs_grid_search(self):
        t0 = time.time()
        rng = substream(SEED, 100)
        worst = 0.0
        for _ in range(50):
            J = int(rng.integers(2, 6))
            Lm = int(rng.integers(3, 12))
            x = rng.uniform(1.0, 8.0, Lm)
            pi_true = rng.uniform(0.0, 0.7)
            zero = rng.random((J, Lm)) < pi_true
            counts = np.where(zero, 0.0, rng.poisson(x, (J, Lm))).astype(float)
            obs = np.ones_like(counts, bool)
            est = estimate_pi_segment(counts, obs, x)
            # Oracle: exhaustive 1e-4 grid over [0, 0.99].
            pis = np.arange(0.0, 0.99 + 5e-5, 1e-4)
            z = (counts == 0)
            ll = (z.sum(axis=0)[None, :] * np.log(pis[:, None] + np.outer(1 - pis, np.exp(-x)))).sum(axis=1) \
                + (~z).sum() * np.log1p(-pis)
            oracle = pis[np.argmax(ll)]
            worst = max(worst, abs(est - oracle))
        _line("AC6a", f"ZIP segment MLE vs 1e-4 grid search: max |diff| = "
                      f"{worst:.2e} over 50 instances (needs < 1e-3, "
                      f"{time.time() - t0:.1f}s)")
        assert worst < 1e-3

    def test_balanced_lmm_vs_anova_closed_forms(self):
        rng = substream(SEED, 101)
        worst = 0.0
        for _ in range(20):
            n = int(rng.integers(3, 12))
            J = int(rng.integers(2, 8))
            y = rng.normal(size=(n, 1)) * rng.uniform(0, 2) \
                + rng.normal(size=(n, J)) * rng.uniform(0.1, 2)
            fit = fit_random_intercept(y)
            ybar = y.mean(axis=1)
            grand = y.mean()
            msw = np.sum((y - ybar[:, None]) ** 2) / (n * (J - 1))
            msb = J * np.sum((ybar - grand) ** 2) / (n - 1)
            sa2 = max(0.0, (msb - msw) / J)
            shrink = sa2 / (sa2 + msw / J) if sa2 + msw > 0 else 0.0
            oracle = grand + shrink * (ybar - grand)
            worst = max(worst, float(np.max(np.abs(fit.xhat - oracle))))
        _line("AC6b", f"balanced LMM vs ANOVA closed forms: max |diff| = "
                      f"{worst:.2e} (needs < 1e-10)")
        assert worst < 1e-10

    def test_separate_qr_vs_vertex_enumeration(self):
        rng = substream(SEED, 102)
        worst = 0.0
        for _ in range(8):
            n = int(rng.integers(8, 13))
            K, p = 2, 1
            xhat = rng.normal(size=(n, K))
            Z = np.ones((n, p))
            Y = xhat @ rng.normal(size=K) + rng.normal(size=n)
            tau = float(rng.uniform(0.15, 0.85))
            _, _, obj = fit_separate(Y, xhat, Z, tau)
            D = np.hstack([xhat, Z])
            best = np.inf
            for idx in itertools.combinations(range(n), K + p):
                sub = D[list(idx)]
                if abs(np.linalg.det(sub)) < 1e-12:
                    continue
                b = np.linalg.solve(sub, Y[list(idx)])
                best = min(best, float(np.sum(check_loss(Y - D @ b, tau))))
            worst = max(worst, abs(obj - best))
        _line("AC6c", f"separate QR objective vs vertex enumeration: "
                      f"max |diff| = {worst:.2e} (needs < 1e-8)")
        assert worst < 1e-8

    def test_basis_round_trip_identity(self):
        rng = substream(SEED, 103)
        worst = 0.0
        grid = build_grid(100)
        for kind, K in ((BSPLINE_CUBIC, 5), (BSPLINE_CUBIC, 9), (COSINE, 6)):
            basis = make_basis(kind, K, grid)
            curve = rng.normal(size=K) @ basis.eval
            out = reconstruct(project(curve, basis), basis)
            worst = max(worst, float(np.max(np.abs(out - curve))))
        _line("AC6d", f"basis round-trip identity: max |diff| = {worst:.2e} "
                      f"(needs < 1e-8)")
        assert worst < 1e-8


def _bootstrap_run(run_seed, beta_amp):
    """One Monte Carlo run of the calibrated global test (n=173, B=300)."""
    grid = build_grid(100)
    basis = make_basis(BSPLINE_CUBIC, 8, grid)
    rng = substream(run_seed, 0)
    n = 173
    X = simlab.gen_latent_X(n, grid, rng)
    w = grid.trapezoid_weights()
    xhat = (X * w) @ basis.eval.T
    Z = np.column_stack([np.ones(n), rng.normal(1.0, 0.5, n),
                         (rng.random(n) < 0.6).astype(float)])
    beta = beta_amp * np.sin(np.pi * grid.points)
    Y = (X * w) @ beta + Z @ [0.0, 0.5, 0.6] + rng.normal(0.0, 0.1, n)
    res = wild_bootstrap_global_test(Y, xhat, Z, basis, B=300, seed=run_seed,
                                     multiplier=RADEMACHER, residuals=FULL)
    return res.p_value


def test_ac7_inference_size_and_power():
    # Calibrated configuration: Rademacher multipliers on full-model
    # residuals. The default recipe (Bernoulli {0,1} multipliers, reduced
    # residuals) is anti-conservative and is exercised elsewhere.
    runs = 200
    p_null = np.array([_bootstrap_run(SEED + 1000 + i, 0.0) for i in range(runs)])
    p_alt = np.array([_bootstrap_run(SEED + 5000 + i, 0.5) for i in range(runs)])
    size = float(np.mean(p_null < 0.05))
    power = float(np.mean(p_alt < 0.05))
    _line("AC7", f"wild bootstrap (rademacher, full residuals): size = "
                 f"{size:.3f} (band [0.02, 0.10]), power = {power:.3f} "
                 f"(needs >= 0.95) over {runs} runs, B=300, n=173")
    assert 0.02 <= size <= 0.10
    assert power >= 0.95


def test_ac8_simulate_determinism(tmp_path):
    from zifqr.cli import main
    scen = tmp_path / "scenario.toml"
    scen.write_text(
        'scenario_id = "det"\nn = 30\nL = 20\nJ = 3\nR = 4\n'
        "pi0 = 0.3\npidelta = 0.0\nK = 4\n"
        'methods = ["average", "be-zime", "oracle"]\n'
        "taus = [0.25, 0.5, 0.75]\n")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["simulate", "--scenario", str(scen), "--seed", str(SEED),
                 "--out", str(out1)]) == 0
    assert main(["simulate", "--scenario", str(scen), "--seed", str(SEED),
                 "--out", str(out2)]) == 0
    b1 = (out1 / "aggregate.csv").read_bytes()
    b2 = (out2 / "aggregate.csv").read_bytes()
    same = b1 == b2
    _line("AC8", f"byte-identical aggregate CSVs across reruns: {same}")
    assert same
    assert (out1 / "replicates.csv").read_bytes() == (out2 / "replicates.csv").read_bytes()
