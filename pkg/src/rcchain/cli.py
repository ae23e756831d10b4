"""Batch command-line entry point.

Subcommands: analyze (queueing sweeps), simulate (scenario runs),
preset (canned experiments), ledger-verify / ledger-export, and compare
(pipeline simulator vs closed forms). One seed drives all randomness;
outputs are written atomically, and a malformed config exits before any
file is touched. RCCHAIN_OUT overrides --out when set.

Exit codes: 0 success, 2 config error, 3 instability refusal,
4 integrity failure, 5 preset assertion failure, 6 unreadable input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .ioutil import csv_text, json_text, write_text_atomic
from .pipeline_des import BLOCK_FEED, DEVIATION_COLUMNS, deviation_table, simulate_pipeline
from .presets import PRESETS, run_preset
from .queueing import (
    ORDERER_MODES,
    QueueNetworkConfig,
    REPORT_COLUMNS,
    UnstableConfigError,
    report_rows,
    sweep,
)
from .reputation import ReputationMode
from .scenario import ScenarioConfigError, load_scenario_config, run_scenario
from .ledger import verify_export_lines

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_INTEGRITY = 4
EXIT_ASSERTION = 5
EXIT_IO = 6


def _out_dir(args) -> str:
    return os.environ.get("RCCHAIN_OUT") or args.out


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _parse_grid(doc: dict, orderer_mode_override: str | None) -> tuple:
    _check_keys(
        doc,
        {"lambda0", "batch_sizes", "mu0", "mu2", "q01", "q23", "orderer_mode"},
        "analyze config",
    )
    lam = doc.get("lambda0", {"start": 10, "stop": 110, "step": 10})
    if isinstance(lam, dict):
        _check_keys(lam, {"start", "stop", "step"}, "lambda0")
        start, stop, step = lam["start"], lam["stop"], lam.get("step", 10)
        lambdas = []
        v = float(start)
        while v <= float(stop) + 1e-9:
            lambdas.append(v)
            v += float(step)
    else:
        lambdas = [float(x) for x in lam]
    batch_sizes = [int(m) for m in doc.get("batch_sizes", [10, 50, 100])]
    base = QueueNetworkConfig(
        lambda0=lambdas[0] if lambdas else 1.0,
        q01=float(doc.get("q01", 0.9)),
        q23=float(doc.get("q23", 0.95)),
        mu0=float(doc.get("mu0", 150.0)),
        mu2=float(doc.get("mu2", 150.0)),
        orderer_mode=orderer_mode_override or doc.get("orderer_mode", "block_granularity"),
    )
    if not lambdas or not batch_sizes:
        raise ScenarioConfigError("analyze config needs nonempty lambda0 and batch_sizes")
    return base, lambdas, batch_sizes


def _write_report(out_dir: str, name: str, fmt: str, columns: list[str],
                  records: list[dict]) -> str:
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "json":
        path = os.path.join(out_dir, f"{name}.json")
        write_text_atomic(path, json_text(records))
    else:
        path = os.path.join(out_dir, f"{name}.csv")
        rows = [[rec[c] for c in columns] for rec in records]
        write_text_atomic(path, csv_text(columns, rows))
    return path


def cmd_analyze(args) -> int:
    doc = _load_json(args.config)
    base, lambdas, batch_sizes = _parse_grid(doc, args.orderer_mode)
    rows = sweep(base, lambdas, batch_sizes)
    records = report_rows(rows)
    out = _out_dir(args)
    path = _write_report(out, "queueing_report", args.format, REPORT_COLUMNS, records)
    summary = {
        "rows": len(rows),
        "stable_rows": sum(1 for r in rows if r.stable),
        "unstable_rows": sum(1 for r in rows if not r.stable),
        "orderer_mode": base.orderer_mode,
    }
    write_text_atomic(os.path.join(out, "stability_summary.json"), json_text(summary))
    print(f"wrote {path} ({summary['rows']} rows, {summary['unstable_rows']} unstable)")
    return EXIT_OK


def cmd_simulate(args, ledger_only: bool = False) -> int:
    cfg = load_scenario_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.mode is not None:
        cfg = dataclasses.replace(cfg, mode=ReputationMode(args.mode))
    report = run_scenario(cfg)
    out = _out_dir(args)
    if ledger_only:
        os.makedirs(out, exist_ok=True)
        from .ledger import export_ledger_lines, export_world_state

        write_text_atomic(
            os.path.join(out, "ledger.jsonl"),
            "\n".join(export_ledger_lines(report.chain)) + "\n",
        )
        write_text_atomic(
            os.path.join(out, "world_state.json"), export_world_state(report.chain)
        )
        print(f"wrote ledger export to {out} ({report.chain.tip.number} blocks)")
        return EXIT_OK
    report.write_outputs(out)
    s = report.summary
    print(
        f"wrote {out}: {s['missions_total']} missions "
        f"({s['completed_good']} good / {s['completed_bad']} bad / "
        f"{s['abandoned']} abandoned), {s['blocks']} blocks"
    )
    return EXIT_OK


def cmd_preset(args) -> int:
    if args.name not in PRESETS:
        print(
            f"unknown preset {args.name!r}; available: {', '.join(sorted(PRESETS))}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    result = run_preset(args.name, seed=args.seed)
    out = _out_dir(args)
    result.write_outputs(out)
    for a in result.assertions:
        print(f"[{'PASS' if a.passed else 'FAIL'}] {a.name}: {a.detail}")
    if not result.all_passed:
        return EXIT_ASSERTION
    print(f"wrote {out}")
    return EXIT_OK


def cmd_ledger_verify(args) -> int:
    try:
        with open(args.path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line]
        bad = verify_export_lines(lines)
    except (OSError, ValueError, KeyError) as err:
        print(f"cannot parse ledger export: {err}", file=sys.stderr)
        return EXIT_IO
    if bad is None:
        print("ok")
        return EXIT_OK
    print(f"integrity failure at block {bad}")
    return EXIT_INTEGRITY


def cmd_compare(args) -> int:
    cfg = QueueNetworkConfig(
        lambda0=args.lambda0,
        batch_size=args.batch_size,
        orderer_mode=args.orderer_mode or "block_granularity",
    )
    stats = simulate_pipeline(cfg, args.n_tx, args.seed or 0,
                              commit_feed=BLOCK_FEED)
    table = deviation_table(cfg, stats)
    out = _out_dir(args)
    path = _write_report(out, "deviation", args.format, DEVIATION_COLUMNS, table)
    worst = max(table, key=lambda r: r["rel_deviation"])
    print(
        f"wrote {path}; confirmation {stats.confirmation_mean:.4f}s, "
        f"largest relative deviation {worst['rel_deviation']:.3f} ({worst['metric']})"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcchain",
        description="Reputation-based consortium-chain simulator and analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--mode", choices=[m.value for m in ReputationMode], default=None)
        p.add_argument("--orderer-mode", choices=ORDERER_MODES, default=None)

    p = sub.add_parser("analyze", help="closed-form queueing sweep")
    common(p)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("simulate", help="run a scenario config")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("ledger-export", help="run a scenario, write only the ledger")
    common(p)
    p.set_defaults(fn=lambda a: cmd_simulate(a, ledger_only=True))

    p = sub.add_parser("preset", help="run a canned experiment")
    p.add_argument("name", help="preset name")
    common(p, config_required=False)
    p.set_defaults(fn=cmd_preset)

    p = sub.add_parser("ledger-verify", help="verify an exported ledger file")
    p.add_argument("path", help="ledger.jsonl export")
    p.set_defaults(fn=cmd_ledger_verify)

    p = sub.add_parser("compare", help="pipeline simulator vs closed forms")
    common(p, config_required=False)
    p.add_argument("--lambda0", type=float, default=37.29)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--n-tx", type=int, default=200_000)
    p.set_defaults(fn=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except UnstableConfigError as err:
        print(f"unstable configuration: {err}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (ScenarioConfigError,) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"cannot read input: {err}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as err:
        print(f"config is not valid JSON: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
