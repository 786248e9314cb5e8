"""Render figures from a completed run directory.

Example::

    panelplots --run runs/dominance --out figs            # all six kinds
    panelplots --run runs/dominance --out figs --kind wealth
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import SchemaError
from .figures import FIGURE_KINDS, PlotRequest, render

_INPUT_FOR_KIND = {
    "reliability": "calibration.csv",
    "drift": "drift.csv",
}


def source_for(kind: str, run_dir: Path) -> Path:
    return run_dir / _INPUT_FOR_KIND.get(kind, "panel.csv")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="panelplots",
                                     description="figures from run artifacts")
    parser.add_argument("--run", required=True, help="run directory")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--kind", choices=FIGURE_KINDS, default=None,
                        help="one figure kind (default: all available)")
    parser.add_argument("--format", choices=("png", "svg"), default="png")
    args = parser.parse_args(argv)

    run_dir = Path(args.run)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = [args.kind] if args.kind else list(FIGURE_KINDS)

    rendered = []
    for kind in kinds:
        src = source_for(kind, run_dir)
        if not src.exists():
            if args.kind is None:
                print(f"skip {kind}: {src.name} not present", file=sys.stderr)
                continue
            print(f"error: {src} not found", file=sys.stderr)
            return 1
        out_path = out_dir / f"{kind}.{args.format}"
        try:
            render(PlotRequest(panel_path=str(src), kind=kind,
                               out_path=str(out_path)))
        except (SchemaError, ValueError) as exc:
            print(f"error rendering {kind}: {exc}", file=sys.stderr)
            return 1
        rendered.append(out_path.name)
    print("rendered: " + ", ".join(rendered) if rendered else "nothing rendered")
    return 0 if rendered else 1


if __name__ == "__main__":
    sys.exit(main())
