"""hexwave-render: draw figures from hexwave output directories."""

from __future__ import annotations

import argparse
import sys

from .readers import ReaderError
from .render import KINDS, FigureJob, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hexwave-render",
        description="Render hexwave HGR/CSV outputs to PNG figures")
    parser.add_argument("--manifest", required=True, help="path to a run's manifest.json")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--colormap", default="inferno")
    parser.add_argument("--no-overlay", action="store_true",
                        help="skip the kappa = 0 curve overlay on fig1 panels")
    args = parser.parse_args(argv)
    try:
        job = FigureJob(manifest_path=args.manifest, kind=args.kind, out_path=args.out,
                        colormap=args.colormap, overlay=not args.no_overlay)
        info = render(job)
    except (ReaderError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {info['out']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
