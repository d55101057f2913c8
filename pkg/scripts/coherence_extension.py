"""Rabi decay versus transverse CCDD decay of the full ensemble.

Writes both traces and prints the fitted decay times and their ratio.
"""

import warnings

from _common import SYSTEM, TWO_PI, ensemble, out_dir, parser
from nvccdd import io as nio
from nvccdd.analysis import damped_sinusoid, fit
from nvccdd.protocols import ProtocolSpec, Sampling, run_ccdd, run_rabi
from nvccdd.spin import DriveConfig

OMEGA1 = TWO_PI * 11.36e6


def main():
    args = parser(__doc__).parse_args()
    out, ens = out_dir(args), ensemble(args)
    rabi = run_rabi(ProtocolSpec("rabi", SYSTEM, DriveConfig(OMEGA1), Sampling(2e-9, 400)), ens)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ccdd = run_ccdd(ProtocolSpec("ccdd", SYSTEM, DriveConfig(OMEGA1, OMEGA1 / 10),
                                     Sampling(TWO_PI / OMEGA1, 600)), ens)
    r1 = fit(damped_sinusoid(), rabi.times, rabi.differential)
    r2 = fit(damped_sinusoid(p=1.0, background=True), ccdd.times, ccdd.differential)
    nio.write_trace(out / "rabi.csv", rabi)
    nio.write_trace(out / "ccdd.csv", ccdd)
    print(f"T_O1 = {r1['T'] * 1e9:.1f} ns (p = {r1['p']:.2f})")
    print(f"T_O2 = {r2['T'] * 1e6:.2f} us")
    print(f"ratio = {r2['T'] / r1['T']:.1f}")


if __name__ == "__main__":
    main()
