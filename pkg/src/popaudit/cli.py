"""Command-line interface: run audits, print dataset stats, re-emit plot CSVs.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from .dataset import DataFormatError, load_dataset, stats
from .pipeline import AuditConfig, emit_reports, run_audit
from .validation import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popaudit",
        description="User-centered popularity-bias audit for top-N recommenders")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full audit and emit reports")
    run.add_argument("--config", required=True, help="JSON config file")
    run.add_argument("--seed", type=int, default=None, help="override run seed")
    run.add_argument("--out", default=None, help="override output directory")
    run.add_argument("--algorithms", default=None,
                     help="comma-separated algorithm subset, e.g. BPR,Popular")

    st = sub.add_parser("stats", help="print dataset statistics")
    st.add_argument("--config", required=True)

    fig = sub.add_parser("figures-data",
                         help="re-emit group-level plot CSVs from an audit.json")
    fig.add_argument("--out", required=True,
                     help="directory containing audit.json; CSVs are written here")
    fig.add_argument("--audit", default=None,
                     help="path to audit.json (default: <out>/audit.json)")
    return parser


def _load_config(args) -> AuditConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "algorithms", None):
        overrides["algorithms"] = tuple(a.strip() for a in args.algorithms.split(","))
    return AuditConfig.from_json(args.config, **overrides)


def cmd_run(args) -> int:
    config = _load_config(args)
    report = run_audit(config)
    paths = emit_reports(report)
    print(f"wrote {len(paths)} report files to {config.out_dir}")
    if report.failures:
        print(f"failed algorithms: {sorted(report.failures)}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    config = _load_config(args)
    dataset = load_dataset(config.ratings_path, config.genres_path, config.format)
    s = stats(dataset)
    print(f"users:        {s.n_users}")
    print(f"items:        {s.n_items}")
    print(f"interactions: {s.n_interactions}")
    print(f"density:      {s.density:.6f}")
    print(f"genres:       {len(dataset.genre_catalog)}")
    return EXIT_OK


def cmd_figures_data(args) -> int:
    out = Path(args.out)
    audit_path = Path(args.audit) if args.audit else out / "audit.json"
    if not audit_path.exists():
        raise ConfigError(f"no audit.json at {audit_path}")
    audit = json.loads(audit_path.read_text())
    out.mkdir(parents=True, exist_ok=True)
    written = []
    column_order = {
        "accuracy.csv": ["algorithm", "precision", "recall", "ndcg",
                         "n_evaluated", "n_excluded"],
        "overlap_matrix.csv": ["item_group", "genre_group", "overlap_pct"],
        "alpha_sweep.csv": ["algorithm", "alpha", "n_users", "mean_pl", "mean_upd"],
        "correlations.csv": ["algorithm", "x", "y", "method", "rho", "n", "note"],
        "group_metrics": ["algorithm", "basis", "group", "n_users", "app", "arp",
                          "pl", "pl_user_mean", "upd"],
    }

    def save(records, name):
        if not records:
            return
        df = pd.DataFrame(records)
        order = column_order.get(
            "group_metrics" if name.startswith("group_metrics") else name)
        if order:
            df = df[[c for c in order if c in df.columns]]
        path = out / name
        df.to_csv(path, index=False)
        written.append(path)

    save(audit.get("accuracy"), "accuracy.csv")
    save(audit.get("overlap"), "overlap_matrix.csv")
    save(audit.get("alpha_sweep"), "alpha_sweep.csv")
    save(audit.get("correlations"), "correlations.csv")
    groups = audit.get("group_metrics", [])
    for name in sorted({row["algorithm"] for row in groups}):
        save([row for row in groups if row["algorithm"] == name],
             f"group_metrics_{name}.csv")
    print(f"re-emitted {len(written)} plot CSVs to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "stats": cmd_stats, "figures-data": cmd_figures_data}
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
