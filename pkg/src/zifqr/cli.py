"""Command-line front end: ingestion, correction, quantile fitting, scenario
replication, bootstrap testing, and method comparison.

Exit codes are a stable contract: 0 success, 2 usage error, 3 data error,
4 numerical failure. The ``ZIFQR_SEED`` environment variable overrides any
``--seed`` flag.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import basis as basis_mod
from . import inference, quantreg, simlab, zicorrect
from .core import (
    DataFormatError,
    DegenerateInputError,
    IllConditionedBasisError,
    InvalidArgumentError,
    NumericalFailureError,
    RankDeficientError,
    ReplicatedFunctionalDataset,
    ScalarCovariates,
    RunConfig,
    Segmentation,
    TimeGrid,
    ZifqrError,
)

_BASIS_NAMES = {"bspline": basis_mod.BSPLINE_CUBIC, "cosine": basis_mod.COSINE}

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


@dataclass(frozen=True)
class LongFormatRecord:
    """One row of the long-format measurement CSV."""

    subject_id: str
    replicate_id: str
    time: float
    value: float


# ---------------------------------------------------------------------------
# Ingestion / emission
# ---------------------------------------------------------------------------


def _parse_long_rows(path):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataFormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        expected = ["subject_id", "replicate_id", "time", "value"]
        if [h.strip() for h in header] != expected:
            raise DataFormatError(
                f"{path}: header must be {','.join(expected)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataFormatError(f"{path}:{lineno}: expected 4 fields")
            try:
                t = float(row[2])
                v = float(row[3])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
            if not np.isfinite(v) or v < 0:
                raise DataFormatError(
                    f"{path}:{lineno}: value must be finite and non-negative")
            rows.append((lineno, LongFormatRecord(row[0], row[1], t, v)))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return rows


def ingest_csv(path, time_mode: str = "unit", window=None):
    """Read a long-format CSV into a replicated functional dataset.

    time_mode 'unit' expects times already in [0,1]; 'minutes' maps the
    window (start, end) affinely onto [0,1]. Returns the dataset plus the
    subject and replicate id orderings (both sorted).
    """
    rows = _parse_long_rows(path)
    if time_mode == "minutes":
        if window is None or window[1] <= window[0]:
            raise InvalidArgumentError("minutes mode needs window start < end")
        lo, hi = float(window[0]), float(window[1])
        mapped = []
        for lineno, r in rows:
            if not lo <= r.time <= hi:
                raise DataFormatError(
                    f"{path}:{lineno}: time {r.time} outside window [{lo}, {hi}]")
            mapped.append((lineno, LongFormatRecord(
                r.subject_id, r.replicate_id, (r.time - lo) / (hi - lo), r.value)))
        rows = mapped
    elif time_mode == "unit":
        for lineno, r in rows:
            if not 0.0 <= r.time <= 1.0:
                raise DataFormatError(
                    f"{path}:{lineno}: time {r.time} outside [0,1]")
    else:
        raise InvalidArgumentError(f"unknown time mode {time_mode!r}")

    seen = {}
    for lineno, r in rows:
        key = (r.subject_id, r.replicate_id, r.time)
        if key in seen:
            raise DataFormatError(
                f"{path}: duplicate (subject, replicate, time) at rows "
                f"{seen[key]} and {lineno}")
        seen[key] = lineno

    subject_ids = sorted({r.subject_id for _, r in rows})
    replicate_ids = sorted({r.replicate_id for _, r in rows})
    times = np.array(sorted({r.time for _, r in rows}))
    if times.size < 2:
        raise DataFormatError(f"{path}: need at least 2 distinct time points")
    grid = TimeGrid(times)
    si = {s: i for i, s in enumerate(subject_ids)}
    ri = {s: j for j, s in enumerate(replicate_ids)}
    ti = {t: l for l, t in enumerate(times)}
    values = np.zeros((len(subject_ids), len(replicate_ids), times.size))
    observed = np.zeros_like(values, dtype=bool)
    for _, r in rows:
        i, j, l = si[r.subject_id], ri[r.replicate_id], ti[r.time]
        values[i, j, l] = r.value
        observed[i, j, l] = True
    dataset = ReplicatedFunctionalDataset(grid, values, observed)
    return dataset, tuple(subject_ids), tuple(replicate_ids)


def write_long_csv(dataset: ReplicatedFunctionalDataset, path,
                   subject_ids=None, replicate_ids=None):
    """Emit the observed cells of a dataset in the long format."""
    subject_ids = subject_ids or [f"s{i}" for i in range(dataset.n)]
    replicate_ids = replicate_ids or [f"r{j}" for j in range(dataset.J)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "replicate_id", "time", "value"])
        pts = dataset.grid.points
        for i in range(dataset.n):
            for j in range(dataset.J):
                for l in range(dataset.L):
                    if dataset.observed[i, j, l]:
                        w.writerow([subject_ids[i], replicate_ids[j],
                                    repr(float(pts[l])),
                                    repr(float(dataset.values[i, j, l]))])


def read_outcomes(path, subject_ids):
    """Read the outcomes CSV (subject_id, y, covariates...) aligned to the
    corrected dataset's subject order; an intercept column is prepended."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataFormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "subject_id" or header[1] != "y":
            raise DataFormatError(f"{path}: header must start subject_id,y")
        cov_names = header[2:]
        table = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: wrong field count")
            if row[0] in table:
                raise DataFormatError(f"{path}:{lineno}: duplicate subject {row[0]}")
            try:
                table[row[0]] = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    missing = [s for s in subject_ids if s not in table]
    if missing:
        raise DataFormatError(f"{path}: missing outcomes for subjects {missing[:5]}")
    mat = np.array([table[s] for s in subject_ids])
    Y = mat[:, 0]
    Z = np.column_stack([np.ones(len(subject_ids)), mat[:, 1:]])
    return Y, ScalarCovariates(Z, ("intercept", *cov_names))


# ---------------------------------------------------------------------------
# Scaling and comparison
# ---------------------------------------------------------------------------


def scale_curves(curves: np.ndarray, reference_mean_curve: np.ndarray) -> np.ndarray:
    """Affine rescale by the range of a reference mean trajectory."""
    ref = np.asarray(reference_mean_curve, float)
    lo, hi = float(np.min(ref)), float(np.max(ref))
    if hi <= lo:
        raise DegenerateInputError("reference mean curve is flat")
    return (np.asarray(curves, float) - lo) / (hi - lo)


def mean_abs_deviation(beta_a: np.ndarray, beta_b: np.ndarray) -> np.ndarray:
    """Per-quantile mean absolute pointwise deviation between coefficient
    surfaces (H x L each)."""
    a = np.asarray(beta_a, float)
    b = np.asarray(beta_b, float)
    if a.shape != b.shape:
        raise InvalidArgumentError("coefficient surfaces must share a shape")
    return np.mean(np.abs(a - b), axis=-1)


# ---------------------------------------------------------------------------
# Small file helpers
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_matrix_csv(path, ids, mat, prefix):
    header = ["subject_id"] + [f"{prefix}{k + 1}" for k in range(mat.shape[1])]
    _write_csv(path, header, [[s, *map(float, row)] for s, row in zip(ids, mat)])


def _read_matrix_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids, rows = [], []
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.array(rows), header


def _load_meta(outdir):
    with open(os.path.join(outdir, "meta.json")) as fh:
        return json.load(fh)


def _basis_from_meta(meta):
    grid = TimeGrid(np.array(meta["grid"]))
    return basis_mod.make_basis(meta["basis_kind"], int(meta["K"]), grid)


def _env_seed(seed):
    env = os.environ.get("ZIFQR_SEED")
    return int(env) if env is not None else seed


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


def load_scenario(path):
    """Parse a TOML scenario file into (ScenarioConfig, methods, run options)."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot open {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc

    case = int(raw.get("pi_case", 0))
    pi0 = float(raw.get("pi0", 0.0))
    if case:
        pi_mode = simlab.PiecewisePi(case, pi0)
    else:
        pi_mode = simlab.ConstantPi(pi0, float(raw.get("pidelta", 0.0)))
    scenario = simlab.ScenarioConfig(
        n=int(raw.get("n", 100)), L=int(raw.get("L", 100)),
        J=int(raw.get("J", 5)), R=int(raw.get("R", 100)),
        beta_shape=raw.get("beta_shape", simlab.HALF_SINE),
        eta_beta=int(raw.get("eta_beta", 0)), eta_eps=int(raw.get("eta_eps", 0)),
        sigma=float(raw.get("sigma", 0.1)), pi_mode=pi_mode,
        taus=tuple(raw.get("taus", (0.25, 0.5, 0.75))),
        K_true=int(raw.get("K_true", 50)),
        scenario_id=str(raw.get("scenario_id", os.path.splitext(os.path.basename(path))[0])))

    basis_kind = _BASIS_NAMES.get(raw.get("basis", "bspline"))
    if basis_kind is None:
        raise DataFormatError(f"{path}: unknown basis {raw.get('basis')!r}")
    K = int(raw.get("K", simlab.DEFAULT_REGRESSION_K))
    cK = int(raw.get("correction_K", raw.get("K", simlab.DEFAULT_CORRECTION_K)))
    segments = raw.get("segments", 1)
    if isinstance(segments, (int, float)):
        segments = [int(segments)]
    segments = [int(m) for m in segments]

    names = raw.get("methods", ["naive", "average", "be-me", "be-zime", "oracle"])
    methods = []
    for name in names:
        if name == "be-zime":
            for m in segments:
                label = "be-zime" if len(segments) == 1 else f"be-zime-m{m}"
                methods.append(simlab.MethodSpec("be-zime", label=label, K=K,
                                                 correction_K=cK,
                                                 basis_kind=basis_kind, segments=m))
        else:
            methods.append(simlab.MethodSpec(name, K=K, correction_K=cK,
                                             basis_kind=basis_kind))
    return scenario, methods, {"seed": int(raw.get("seed", 0))}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_simulate(args):
    scenario, methods, opts = load_scenario(args.scenario)
    seed = _env_seed(args.seed if args.seed is not None else opts["seed"])
    R = args.replicates if args.replicates is not None else scenario.R
    threads = args.threads or (os.cpu_count() or 1)
    report = simlab.run_replications(scenario, methods, R=R, seed=seed,
                                     threads=threads)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "aggregate.csv"),
               ["scenario_id", "method", "tau", "metric", "value", "R", "seed"],
               report.rows())
    _write_csv(os.path.join(args.out, "replicates.csv"),
               ["scenario_id", "method", "replicate", "metric", "value"],
               report.replicate_rows())
    print(f"wrote {args.out}/aggregate.csv ({len(report.methods)} methods, R={R})")
    return 0


def _stage1_from_args(args, dataset, basis, seed):
    config = RunConfig(seed=seed)
    name = args.method
    if name == "be-zime":
        seg = Segmentation.equal(args.segments)
        corrected, profile = zicorrect.be_zime(dataset, basis, seg, config)
        return corrected, profile
    if name == "be-me":
        return zicorrect.be_me(dataset, basis, config), None
    if name == "naive":
        return zicorrect.naive_estimator(dataset, basis), None
    if name == "average":
        return zicorrect.average_estimator(dataset, basis), None
    if name == "p-lmm":
        return zicorrect.plmm_estimator(dataset, basis), None
    if name == "p-pmm":
        return zicorrect.ppmm_estimator(dataset, basis), None
    if name == "p-zipmm":
        return zicorrect.pzipmm_estimator(dataset, basis, pi_cap=config.pi_cap), None
    raise InvalidArgumentError(f"unknown method {name!r}")


def _cmd_correct(args):
    dataset, subject_ids, _ = ingest_csv(args.input, args.time_mode,
                                         args.window)
    kind = _BASIS_NAMES[args.basis]
    seed = _env_seed(args.seed)
    if args.K == "auto":
        if args.outcomes is None:
            raise InvalidArgumentError("--K auto requires --outcomes (and --taus)")
        Y, Zc = read_outcomes(args.outcomes, subject_ids)
        taus = _parse_taus(args.taus)
        config = RunConfig(seed=seed)
        candidates = [k for k in config.K_candidates
                      if kind != basis_mod.BSPLINE_CUBIC or k >= 4]
        coeffs_by_K = {}
        for k in candidates:
            try:
                b = basis_mod.make_basis(kind, k, dataset.grid)
                corrected, _ = _run_correct_once(args, dataset, b, seed)
            except ZifqrError:
                continue  # candidate infeasible on this grid
            coeffs_by_K[k] = corrected.coeffs
        K = quantreg.select_K_bic(Y, coeffs_by_K, Zc.Z, taus)
    else:
        K = int(args.K)
    basis = basis_mod.make_basis(kind, K, dataset.grid)
    corrected, profile = _run_correct_once(args, dataset, basis, seed)

    curves = corrected.curves
    coeffs = corrected.coeffs
    scaled = False
    if args.scale_reference:
        _, ref_curves, _ = _read_matrix_csv(
            os.path.join(args.scale_reference, "curves.csv"))
        curves = scale_curves(curves, ref_curves.mean(axis=0))
        coeffs = basis_mod.project(curves, basis)
        scaled = True

    os.makedirs(args.out, exist_ok=True)
    meta = {
        "method": args.method, "basis_kind": kind, "K": K,
        "segments": args.segments, "grid": [float(t) for t in dataset.grid.points],
        "subject_ids": list(subject_ids), "scaled": scaled,
        "iterations": corrected.iterations, "converged": corrected.converged,
    }
    if profile is not None:
        meta["pi_boundaries"] = [float(b) for b in profile.segmentation.boundaries]
    with open(os.path.join(args.out, "meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
    _write_matrix_csv(os.path.join(args.out, "coeffs.csv"), subject_ids, coeffs, "c")
    _write_matrix_csv(os.path.join(args.out, "curves.csv"), subject_ids, curves, "x")
    if profile is not None:
        _write_matrix_csv(os.path.join(args.out, "pi.csv"), subject_ids,
                          profile.pi, "seg")
    print(f"wrote corrected covariate ({args.method}, K={K}) to {args.out}")
    return 0


def _run_correct_once(args, dataset, basis, seed):
    return _stage1_from_args(args, dataset, basis, seed)


def _parse_taus(text):
    try:
        taus = tuple(float(v) for v in text.split(","))
    except (AttributeError, ValueError) as exc:
        raise InvalidArgumentError(f"bad tau list {text!r}") from exc
    return taus


def _cmd_fit_qr(args):
    meta = _load_meta(args.corrected)
    ids, coeffs, _ = _read_matrix_csv(os.path.join(args.corrected, "coeffs.csv"))
    Y, Zc = read_outcomes(args.outcomes, ids)
    taus = _parse_taus(args.taus)
    basis = _basis_from_meta(meta)
    if args.joint:
        fit = quantreg.fit_joint(Y, coeffs, Zc.Z, taus, basis=basis)
    else:
        fit = quantreg.fit_separate_grid(Y, coeffs, Zc.Z, taus, basis=basis)
    os.makedirs(args.out, exist_ok=True)
    out_meta = {"taus": list(taus), "joint": bool(args.joint),
                "K": meta["K"], "basis_kind": meta["basis_kind"],
                "grid": meta["grid"], "method": meta.get("method"),
                "theta_names": list(Zc.names)}
    with open(os.path.join(args.out, "meta.json"), "w") as fh:
        json.dump(out_meta, fh, sort_keys=True, indent=1)
    coef_header = (["tau"] + [f"gamma{k + 1}" for k in range(fit.gamma.shape[1])]
                   + list(Zc.names) + ["objective"])
    coef_rows = [[float(fit.taus[h]), *map(float, fit.gamma[h]),
                  *map(float, fit.theta[h]), float(fit.objective[h])]
                 for h in range(fit.H)]
    _write_csv(os.path.join(args.out, "coefficients.csv"), coef_header, coef_rows)
    grid_pts = meta["grid"]
    beta_rows = [[float(fit.taus[h]), float(t), float(v)]
                 for h in range(fit.H)
                 for t, v in zip(grid_pts, fit.beta_curves[h])]
    _write_csv(os.path.join(args.out, "beta.csv"), ["tau", "t", "value"], beta_rows)
    print(f"wrote quantile fit ({'joint' if args.joint else 'separate'}, "
          f"H={fit.H}) to {args.out}")
    return 0


def _cmd_global_test(args):
    meta = _load_meta(args.corrected)
    ids, coeffs, _ = _read_matrix_csv(os.path.join(args.corrected, "coeffs.csv"))
    Y, Zc = read_outcomes(args.outcomes, ids)
    basis = _basis_from_meta(meta)
    seed = _env_seed(args.seed)
    res = inference.wild_bootstrap_global_test(
        Y, coeffs, Zc.Z, basis, B=args.B, seed=seed,
        multiplier=args.multiplier, residuals=args.residuals)
    print(f"stat={res.stat!r} p_value={res.p_value!r} B={res.B}")
    if args.out:
        _write_csv(args.out, ["stat", "p_value", "B", "seed", "multiplier", "residuals"],
                   [[res.stat, res.p_value, res.B, seed, args.multiplier, args.residuals]])
    return 0


def _read_beta_csv(outdir):
    with open(os.path.join(outdir, "beta.csv"), newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [(float(r[0]), float(r[1]), float(r[2])) for r in reader if r]
    taus = sorted({r[0] for r in rows})
    ts = sorted({r[1] for r in rows})
    ti = {t: i for i, t in enumerate(ts)}
    hi = {tau: h for h, tau in enumerate(taus)}
    mat = np.full((len(taus), len(ts)), np.nan)
    for tau, t, v in rows:
        mat[hi[tau], ti[t]] = v
    return np.array(taus), np.array(ts), mat


def _cmd_compare(args):
    a_beta = os.path.exists(os.path.join(args.a, "beta.csv"))
    b_beta = os.path.exists(os.path.join(args.b, "beta.csv"))
    rows = []
    if a_beta and b_beta:
        taus_a, ts_a, beta_a = _read_beta_csv(args.a)
        taus_b, ts_b, beta_b = _read_beta_csv(args.b)
        if not (np.array_equal(taus_a, taus_b) and np.array_equal(ts_a, ts_b)):
            raise DataFormatError("fit outputs use different tau grids or time grids")
        dev = mean_abs_deviation(beta_a, beta_b)
        rows = [[args.a, args.b, float(tau), "beta_mean_abs_deviation", float(d)]
                for tau, d in zip(taus_a, dev)]
    else:
        # Corrected-covariate dirs: scale both by the --a reference mean
        # trajectory, then compare the mean scaled curves.
        _, curves_a, _ = _read_matrix_csv(os.path.join(args.a, "curves.csv"))
        _, curves_b, _ = _read_matrix_csv(os.path.join(args.b, "curves.csv"))
        if curves_a.shape[1] != curves_b.shape[1]:
            raise DataFormatError("curve grids differ between directories")
        ref = curves_a.mean(axis=0)
        sa = scale_curves(curves_a, ref).mean(axis=0)
        sb = scale_curves(curves_b, ref).mean(axis=0)
        rows = [[args.a, args.b, "", "scaled_mean_curve_abs_deviation",
                 float(np.mean(np.abs(sa - sb)))]]
    for row in rows:
        print(f"{row[3]} tau={row[2]}: {row[4]}")
    if args.out:
        _write_csv(args.out, ["a", "b", "tau", "metric", "value"], rows)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="zifqr", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    ps.add_argument("--scenario", required=True)
    ps.add_argument("--replicates", type=int, default=None)
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--out", required=True)
    ps.add_argument("--threads", type=int, default=None)
    ps.set_defaults(func=_cmd_simulate)

    pc = sub.add_parser("correct", help="stage-one correction of a dataset")
    pc.add_argument("--input", required=True)
    pc.add_argument("--method", required=True,
                    choices=["naive", "average", "p-lmm", "p-pmm", "p-zipmm",
                             "be-me", "be-zime"])
    pc.add_argument("--segments", type=int, default=1)
    pc.add_argument("--basis", choices=sorted(_BASIS_NAMES), default="bspline")
    pc.add_argument("--K", default=str(simlab.DEFAULT_ESTIMATION_K))
    pc.add_argument("--out", required=True)
    pc.add_argument("--time-mode", choices=["unit", "minutes"], default="unit")
    pc.add_argument("--window", type=float, nargs=2, default=None,
                    metavar=("START", "END"))
    pc.add_argument("--outcomes", default=None, help="needed for --K auto")
    pc.add_argument("--taus", default="0.25,0.5,0.75")
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--scale-reference", default=None,
                    help="correct-output dir providing the scaling range")
    pc.set_defaults(func=_cmd_correct)

    pf = sub.add_parser("fit-qr", help="stage-two quantile regression")
    pf.add_argument("--corrected", required=True)
    pf.add_argument("--outcomes", required=True)
    pf.add_argument("--taus", required=True)
    pf.add_argument("--joint", type=_parse_bool, default=True)
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=_cmd_fit_qr)

    pg = sub.add_parser("global-test", help="wild-bootstrap global test")
    pg.add_argument("--corrected", required=True)
    pg.add_argument("--outcomes", required=True)
    pg.add_argument("--B", type=int, default=1000)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--multiplier", choices=[inference.BERNOULLI, inference.RADEMACHER],
                    default=inference.BERNOULLI)
    pg.add_argument("--residuals", choices=[inference.REDUCED, inference.FULL],
                    default=inference.REDUCED)
    pg.add_argument("--out", default=None)
    pg.set_defaults(func=_cmd_global_test)

    pp = sub.add_parser("compare", help="scaling + deviation between outputs")
    pp.add_argument("--a", required=True)
    pp.add_argument("--b", required=True)
    pp.add_argument("--out", default=None)
    pp.set_defaults(func=_cmd_compare)
    return p


def _parse_bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {v!r}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidArgumentError as exc:
        print(f"zifqr: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, DegenerateInputError) as exc:
        print(f"zifqr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailureError, IllConditionedBasisError, RankDeficientError) as exc:
        print(f"zifqr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ZifqrError as exc:
        print(f"zifqr: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
