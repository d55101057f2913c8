"""π/2 state-fidelity maps over detuning and amplitude error for the
rectangular and composite pulses."""

import math

import numpy as np

from _common import out_dir, parser
from nvccdd.pulses import compile_rotation, fidelity_map, ideal_state, make_rect, write_fidelity_csv

STYLES = ("rect", "BB1", "CORPSE", "CORP2SE")


def main():
    ap = parser(__doc__)
    ap.add_argument("--points", type=int, default=81)
    args = ap.parse_args()
    out = out_dir(args)
    # detuning in units of the Rabi frequency
    delta = np.linspace(-0.5, 0.5, args.points)
    eps = np.linspace(-0.3, 0.3, args.points)
    target = ideal_state(make_rect(math.pi / 2, 0.0, 1.0))
    for style in STYLES:
        fmap = fidelity_map(compile_rotation(style, math.pi / 2, 0.0, 1.0), target, delta, eps)
        write_fidelity_csv(out / f"fidelity_{style}.csv", delta, eps, fmap)
        area = np.mean(fmap >= 0.999)
        print(f"{style:8s} fraction of the map with F >= 0.999: {area:.3f}")


if __name__ == "__main__":
    main()
