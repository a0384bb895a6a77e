"""Command-line entry point: predict, simulate, analyze, check, secular.

Exit codes: 0 success, 2 configuration error, 3 numerical failure in at
least one trial, 4 failed ``analyze --assert`` checks.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io as sio
from .config import config_hash, load_raw, to_experiment, validate
from .errors import ConfigError, SpikedError
from .experiments.harness import TrialRecord, gamma_statistics, run_trials
from .experiments.hypotheses import check_h2, check_h3a
from .laws import law_from_dict
from .perturb import LowRankOperator
from .secular import SecularSystem, solve_rank_one, eigenvalues_by_index
from .stats import ks_one_sample, moments, normal_cdf
from .stieltjes import PredictionReport

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4
VAR_BAND = (0.85, 1.15)
KS_LEVEL = 0.01
STICK_FRACTION = 0.95


def _load_config(args):
    raw = load_raw(args.config)
    if getattr(args, "seed", None) is not None:
        raw = dict(raw, master_seed=args.seed)
    model = validate(raw)
    try:
        exp = to_experiment(model)
        exp.resolved_sampler()
    except ValueError as exc:
        raise ConfigError("", str(exc)) from None
    return model, exp


def _table(report: PredictionReport) -> str:
    lines = [f"theta_low = {report.theta_low:.6g}   theta_high = {report.theta_high:.6g}",
             f"{'theta':>10} {'class':>15} {'rho':>12} {'c_alpha':>10} {'var(gamma)':>11}"]
    for s in report.spikes:
        c = "-" if s.c_alpha is None else f"{s.c_alpha:.6g}"
        v = "-" if s.gauss_variance is None else f"{s.gauss_variance:.6g}"
        lines.append(f"{s.theta:>10.6g} {s.classification:>15} {s.rho:>12.6g} {c:>10} {v:>11}")
    return "\n".join(lines)


def cmd_predict(args) -> int:
    _, exp = _load_config(args)
    report = exp.prediction()
    if report.any_critical:
        print("warning: critical theta; no limit theorem applies to it", file=sys.stderr)
    print(json.dumps(report.to_dict(), indent=2))
    print(_table(report))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        sio.write_json(Path(args.out) / "prediction.json", report.to_dict())
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.time()
    model, exp = _load_config(args)
    out = Path(args.out)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    records = run_trials(exp, threads=args.threads)
    report = exp.prediction()
    sio.write_jsonl(records, out / "trials.jsonl")
    sio.write_json(out / "prediction.json", report.to_dict())
    for n in exp.n_values:
        for fs in gamma_statistics(records, report, n=n):
            rows = [(i, *row) for i, row in enumerate(fs.gammas.tolist())]
            sio.write_csv(out / "plots" / f"gamma_n{n}_group{fs.group_id}.csv",
                          ["trial", *[f"gamma{k}" for k in range(fs.multiplicity)]], rows)
    stick_rows = [(r.n, r.trial_id, *(r.sticking.get("high_window", [])[:1] or [float("nan")]))
                  for r in records if r.error is None]
    sio.write_csv(out / "plots" / "sticking_top.csv", ["n", "trial", "distance"], stick_rows)
    outputs = {"trials": "trials.jsonl", "prediction": "prediction.json", "plots": "plots/"}
    sio.write_json(out / "manifest.json",
                   sio.make_manifest(config_hash(model), exp.master_seed, outputs, started))
    errors = sum(r.error is not None for r in records)
    print(f"{len(records)} trials written to {out / 'trials.jsonl'} ({errors} failed)")
    return EXIT_NUMERIC if errors else EXIT_OK


def analyze(records: list[TrialRecord], report: PredictionReport, alpha_prime: float = 0.3):
    """Summary rows (n, section, name, value) and a list of failed checks."""
    rows, failures = [], []
    for n in sorted({r.n for r in records}):
        recs = [r for r in records if r.n == n]
        ok = [r for r in recs if r.error is None]
        errs = len(recs) - len(ok)
        rows.append((n, "trials", "count", len(recs)))
        rows.append((n, "trials", "errors", errs))
        if errs:
            failures.append(f"n={n}: {errs} trials failed")
        for fs in gamma_statistics(ok, report, n=n):
            g = fs.gammas
            tag = f"group{fs.group_id}"
            rows.append((n, "gamma", f"{tag}_alpha", fs.alpha))
            rows.append((n, "gamma", f"{tag}_multiplicity", fs.multiplicity))
            rows.append((n, "gamma", f"{tag}_target_variance", fs.target_variance))
            if fs.multiplicity == 1 and g.shape[0] >= 2:
                mo = moments(g[:, 0])
                rows.append((n, "gamma", f"{tag}_mean", mo.mean))
                rows.append((n, "gamma", f"{tag}_variance", mo.variance))
                if fs.target_variance and fs.target_variance > 0:
                    ratio = mo.variance / fs.target_variance
                    rows.append((n, "gamma", f"{tag}_variance_ratio", ratio))
                    if not VAR_BAND[0] <= ratio <= VAR_BAND[1]:
                        failures.append(f"n={n} {tag}: variance ratio {ratio:.4f}")
                    if g.shape[0] >= 10:
                        ks = ks_one_sample(fs.standardized[:, 0], normal_cdf)
                        rows.append((n, "gamma", f"{tag}_ks_p", ks.p_value))
                        if ks.p_value < KS_LEVEL:
                            failures.append(f"n={n} {tag}: KS p = {ks.p_value:.3g}")
            elif g.shape[1] == 2:
                rows.append((n, "gamma", f"{tag}_mean_gap", float(np.mean(g[:, 1] - g[:, 0]))))
        thr = n ** (-1 + alpha_prime)
        n_stick_hi = sum(s.classification == "sticks_right" for s in report.spikes)
        n_stick_lo = sum(s.classification == "sticks_left" for s in report.spikes)
        for side, count, skip in (("high", n_stick_hi, report.p_plus), ("low", n_stick_lo, report.p_minus)):
            for j in range(skip + 1, skip + count + 1):
                d = [r.sticking[f"{side}_window"][j - 1] for r in ok if len(r.sticking[f"{side}_window"]) >= j]
                if not d:
                    continue
                frac = float(np.mean(np.asarray(d) <= thr))
                rows.append((n, "sticking", f"{side}{j}_fraction", frac))
                rows.append((n, "sticking", f"{side}{j}_median", float(np.median(d))))
                if frac < STICK_FRACTION:
                    failures.append(f"n={n} sticking {side}{j}: fraction {frac:.3f}")
    return rows, failures


def cmd_analyze(args) -> int:
    base = Path(args.out) if args.out else None
    rec_path = Path(args.records) if args.records else base / "trials.jsonl"
    pred_path = Path(args.prediction) if args.prediction else rec_path.parent / "prediction.json"
    records = [TrialRecord.from_dict(d) for d in sio.read_jsonl(rec_path)]
    report = PredictionReport.from_dict(json.loads(Path(pred_path).read_text()))
    rows, failures = analyze(records, report, args.alpha_prime)
    out_dir = base or rec_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    sio.write_csv(out_dir / "summary.csv", ["n", "section", "name", "value"], rows)
    for row in rows:
        print(",".join(str(v) for v in row))
    for f in failures:
        print(f"FAIL {f}", file=sys.stderr)
    if args.assert_checks and failures:
        return EXIT_ASSERT
    return EXIT_OK


def _limit_arg(args):
    if args.limit:
        text = Path(args.limit).read_text() if Path(args.limit).is_file() else args.limit
        return law_from_dict(json.loads(text))
    if args.config:
        _, exp = _load_config(args)
        return exp.ensemble.limit_law()
    raise ConfigError("/limit", "pass --limit or --config")


def cmd_check(args) -> int:
    spec = sio.read_spectrum(args.spectrum)
    limit = _limit_arg(args)
    sides = ["a", "b"] if args.side == "both" else [args.side]
    h3a = [check_h3a(spec, args.p, args.alpha, s, limit).to_dict() for s in sides]
    z_points = args.z or [limit.b + 0.5, limit.a - 0.5]
    h2 = check_h2({spec.size: spec}, limit, z_points)
    print(json.dumps({"h3a": h3a, "h2": h2.to_dict()}, indent=2, default=float))
    return EXIT_OK


def cmd_secular(args) -> int:
    lam = sio.read_spectrum(args.spectrum)
    if args.spikes:
        sp = json.loads(Path(args.spikes).read_text())
        thetas = np.asarray(sp["thetas"], dtype=float)
        vecs = np.asarray(sp["vectors"], dtype=float).reshape(len(thetas), -1)
    else:
        if not args.theta or not args.vector or len(args.theta) != len(args.vector):
            raise ConfigError("/spikes", "give --spikes FILE or matching --theta/--vector pairs")
        thetas = np.asarray(args.theta, dtype=float)
        vecs = np.asarray([[float(x) for x in v.split(",")] for v in args.vector])
    if vecs.shape[1] != lam.size:
        raise ConfigError("/spikes/vectors", f"vectors must have length {lam.size}")
    if np.any(thetas == 0):
        raise ConfigError("/spikes/thetas", "theta must be nonzero")
    sys_ = SecularSystem.from_diagonal(lam, LowRankOperator(thetas, vecs.T))
    if sys_.r == 1:
        vals = solve_rank_one(sys_).values
    else:
        vals = eigenvalues_by_index(sys_, np.arange(sys_.n))
    rows = [(i + 1, float(v)) for i, v in enumerate(vals)]
    if args.out:
        sio.write_csv(args.out, ["index", "value"], rows)
    print("index,value")
    for i, v in rows:
        print(f"{i},{v!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spikedrmt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("predict", help="outlier locations and fluctuation scales")
    q.add_argument("--config", required=True)
    q.add_argument("--out")
    q.add_argument("--seed", type=int)
    q.set_defaults(func=cmd_predict)

    q = sub.add_parser("simulate", help="run Monte Carlo trials")
    q.add_argument("--config", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--seed", type=int)
    q.add_argument("--threads", type=int, default=1, help="worker threads, 0 = all cores")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("analyze", help="summarise trials.jsonl against prediction.json")
    q.add_argument("--out", help="run directory (reads trials.jsonl, writes summary.csv)")
    q.add_argument("--records")
    q.add_argument("--prediction")
    q.add_argument("--alpha-prime", type=float, default=0.3)
    q.add_argument("--assert", dest="assert_checks", action="store_true")
    q.set_defaults(func=cmd_analyze)

    q = sub.add_parser("check", help="H3a sums and H2 deviation for a spectrum")
    q.add_argument("--spectrum", required=True)
    q.add_argument("--limit", help="JSON object or file, e.g. '{\"name\": \"semicircle\", \"sigma\": 1}'")
    q.add_argument("--config")
    q.add_argument("--p", type=int, default=1)
    q.add_argument("--alpha", type=float, default=0.2)
    q.add_argument("--side", choices=["a", "b", "both"], default="both")
    q.add_argument("--z", type=float, nargs="*")
    q.set_defaults(func=cmd_check)

    q = sub.add_parser("secular", help="deformed spectrum of diag(spectrum) + spikes")
    q.add_argument("--spectrum", required=True)
    q.add_argument("--spikes", help="JSON with 'thetas' and 'vectors'")
    q.add_argument("--theta", type=float, action="append")
    q.add_argument("--vector", action="append", help="comma-separated entries")
    q.add_argument("--out")
    q.set_defaults(func=cmd_secular)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "analyze" and not (args.out or args.records):
        print("analyze needs --out or --records", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpikedError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
