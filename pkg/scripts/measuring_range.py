"""Fitted oscillation amplitude versus target Rabi frequency for direct Rabi
magnetometry and for CCDD magnetometry at the low-attenuation resonance."""

import warnings

import numpy as np

from _common import SYSTEM, TWO_PI, ensemble, out_dir, parser
from nvccdd import io as nio
from nvccdd.analysis import damped_sinusoid, fit
from nvccdd.protocols import (
    ProtocolSpec,
    Sampling,
    run_ccdd_magnetometry,
    run_direct_rabi_magnetometry,
)
from nvccdd.spin import DriveConfig, TargetSignal

OMEGA1 = TWO_PI * 11.36e6
OMEGA2 = OMEGA1 / 10


def direct(ens, omega_t):
    spec = ProtocolSpec("rabi-mag", SYSTEM, None,
                        Sampling(min(0.5e-6, TWO_PI / omega_t / 20), 400),
                        target=TargetSignal(omega_t, SYSTEM.omega0))
    tr = run_direct_rabi_magnetometry(spec, ens)
    return fit(damped_sinusoid(), tr.times, tr.differential)


def ccdd(ens, omega_t):
    spec = ProtocolSpec("ccdd-mag", SYSTEM, DriveConfig(OMEGA1, OMEGA2),
                        Sampling(TWO_PI / OMEGA2, 200),
                        target=TargetSignal(omega_t, SYSTEM.omega0 - OMEGA2))
    tr = run_ccdd_magnetometry(spec, ens)
    return fit(damped_sinusoid(p=1.0, background=True), tr.times, tr.differential)


def main():
    ap = parser(__doc__)
    ap.add_argument("--points", type=int, default=7)
    args = ap.parse_args()
    out, ens = out_dir(args), ensemble(args)
    grid = TWO_PI * np.geomspace(100e3, 946e3, args.points)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for w in grid:
            d, c = direct(ens, w), ccdd(ens, w)
            rows.append((w / TWO_PI, abs(d["A"]), d["omega"] / TWO_PI, abs(c["A"]),
                         c["omega"] / TWO_PI))
            print("f_t = %7.1f kHz  direct A %.4f  CCDD A %.4f  CCDD f'/(f_t/2) %.4f"
                  % (w / TWO_PI / 1e3, rows[-1][1], rows[-1][3], 2 * rows[-1][4] / rows[-1][0]))
    cols = np.array(rows).T
    nio.write_table(out / "measuring_range.csv",
                    ["f_t_hz", "direct_amplitude", "direct_freq_hz", "ccdd_amplitude",
                     "ccdd_freq_hz"], list(cols))


if __name__ == "__main__":
    main()
