"""Shared settings of the reproduction scripts."""

import argparse
import math
from pathlib import Path

from nvccdd.ensemble import InhomogeneityModel, build_quadrature
from nvccdd.spin import SystemParams

TWO_PI = 2.0 * math.pi
SYSTEM = SystemParams(TWO_PI * 2.7081e9)


def parser(doc: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=doc)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--quick", action="store_true",
                    help="coarse ensemble for a fast, less converged run")
    return ap


def out_dir(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def ensemble(args, model=None):
    model = model or InhomogeneityModel()
    if args.quick:
        return build_quadrature(model, 201, 5, "uniform")
    return build_quadrature(model, 801, 9, "uniform")
