"""CLI: render every figure from an audit CSV directory."""

from __future__ import annotations

import argparse
import sys

from .render import render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="popaudit-figures",
        description="Render popaudit CSV reports into figures")
    parser.add_argument("--in", dest="csv_dir", required=True,
                        help="directory with the audit CSV emission")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="directory for the rendered images")
    parser.add_argument("--format", choices=("png", "svg"), default="png")
    args = parser.parse_args(argv)
    results = render_all(args.csv_dir, args.out_dir, args.format)
    rendered = [r for r in results if r.status == "rendered"]
    failed = [r for r in results if r.status == "failed"]
    for r in rendered:
        print(f"rendered {r.figure_id} -> {r.path}")
    for r in failed:
        print(f"failed   {r.figure_id}: {r.error}", file=sys.stderr)
    print(f"{len(rendered)} rendered, {len(failed)} failed")
    return 0 if not failed else 1


if __name__ == "__main__":
    raise SystemExit(main())
