"""Command-line front end.

Subcommands: ``fig1`` (distortion-vs-SNR sweep), ``fig2`` (privacy-distortion
trade-off), ``verify`` (invariant suites), ``keys`` (key bundle generation and
audit), ``oracle`` (exact discrete leakage), ``mse`` (distortion report at one
point).  Exit codes: 0 success, 1 check failures, 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .analytics import distortion_report, reports_to_csv_rows, REPORT_CSV_COLUMNS
from .keys import bundle_to_json, default_generator, sample_keys, verify_bundle
from .oracle import DiscreteScenario, scenario_result


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output path")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials override")
    p.add_argument("--threads", type=int, help="worker thread count override")


def _apply_overrides(cfg: dict, args) -> dict:
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.threads is not None:
        cfg["threads"] = args.threads
    return cfg


def _cmd_fig1(args) -> int:
    cfg = harness.load_config(args.config) if args.config else harness.default_fig1_config()
    spec = harness.fig1_spec_from_config(_apply_overrides(cfg, args))
    rows = harness.run_fig1(spec)
    out = args.out or f"{spec.name}.csv"
    harness.write_csv(rows, harness.FIG1_COLUMNS, out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _cmd_fig2(args) -> int:
    cfg = harness.load_config(args.config) if args.config else harness.default_fig2_config()
    cfg = _apply_overrides(cfg, args)
    if args.trials is not None:
        cfg["realizations"] = args.trials
    spec = harness.fig2_spec_from_config(cfg)
    rows, summary = harness.run_fig2(spec)
    out = args.out or f"{spec.name}.csv"
    harness.write_csv(rows, harness.FIG2_COLUMNS, out)
    summary_path = f"{out[:-4] if out.endswith('.csv') else out}.summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(f"wrote {len(rows)} rows to {out}; summary at {summary_path}")
    disc = summary["anchor"]["discrepancy"]
    if disc:
        print(f"anchor discrepancy documented: {disc}")
    return 0


def _cmd_verify(args) -> int:
    suites = args.suite or ["all"]
    seed = args.seed if args.seed is not None else harness.DEFAULT_SEED
    report = harness.run_verify(suites, seed=seed)
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] {c['suite']}/{c['name']}: {c['detail']}")
    return 0 if report["passed"] else 1


def _cmd_keys(args) -> int:
    seed = args.seed if args.seed is not None else harness.DEFAULT_SEED
    bundle = sample_keys(default_generator(args.clients), args.dims, seed)
    report = verify_bundle(bundle)
    doc = json.loads(bundle_to_json(bundle))
    doc["verification"] = [
        {"name": c.name, "passed": c.passed, "detail": c.detail} for c in report.checks
    ]
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if report.all_passed else 1


def _cmd_oracle(args) -> int:
    sc = DiscreteScenario(
        q=args.q, K=args.clients, view=args.view, eavesdropper=args.eavesdropper,
        key_model=args.key_model)
    result = scenario_result(sc)
    text = json.dumps(result, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(f"q={result['q']} K={result['K']} view={result['view']} "
          f"mi_nats={result['mi_nats']!r} outcomes={result['outcomes']}")
    return 0


def _cmd_mse(args) -> int:
    seed = args.seed if args.seed is not None else harness.DEFAULT_SEED
    trials = args.trials if args.trials is not None else 1_000_000
    s = [float(v) for v in args.s.split(",")]
    rep = distortion_report(s, args.sigma_eff, args.a, trials=trials, seed=seed)
    rows = reports_to_csv_rows(distortion=[rep])
    if args.out:
        harness.write_csv(rows, REPORT_CSV_COLUMNS, args.out)
        print(f"wrote report to {args.out}")
    print(f"s={s} sigma_eff={rep.sigma_eff}: closed={rep.delta_closed!r} "
          f"mc={rep.delta_mc!r} (stderr {rep.mc_stderr:.3e}) "
          f"bounds=[{rep.lower!r}, {rep.upper!r}] L={rep.truncation_L} "
          f"tail<={rep.tail_bound:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aircomp",
        description="Private over-the-air aggregation: simulation and analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fig1", help="pointwise MSE sweep against analytical bounds")
    _add_common(p)
    p.set_defaults(fn=_cmd_fig1)

    p = sub.add_parser("fig2", help="privacy-distortion trade-off sweep")
    _add_common(p)
    p.set_defaults(fn=_cmd_fig2)

    p = sub.add_parser("verify", help="run invariant suites")
    _add_common(p)
    p.add_argument("--suite", action="append",
                   help=f"suite name (repeatable): {', '.join(harness.VERIFY_SUITES)} or all")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("keys", help="generate and audit a key bundle")
    _add_common(p)
    p.add_argument("--clients", type=int, default=10)
    p.add_argument("--dims", type=int, default=10)
    p.set_defaults(fn=_cmd_keys)

    p = sub.add_parser("oracle", help="exact discrete leakage enumeration")
    _add_common(p)
    p.add_argument("--q", type=int, required=True, help="group modulus")
    p.add_argument("--clients", type=int, required=True)
    p.add_argument("--view", choices=("server", "client"), default="server")
    p.add_argument("--eavesdropper", type=int, default=0)
    p.add_argument("--key-model", default="zero-sum",
                   choices=("zero-sum", "independent-uniform", "independent-subset"))
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("mse", help="distortion report at one signal point")
    _add_common(p)
    p.add_argument("--s", default="0.0", help="comma-separated signal coordinates")
    p.add_argument("--sigma-eff", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0 / 3.0, help="bound half-width")
    p.set_defaults(fn=_cmd_mse)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
