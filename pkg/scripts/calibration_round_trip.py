"""Simulated calibration sweeps, then a known target field recovered from its
signal through the calibration."""

import warnings

import numpy as np

from _common import SYSTEM, TWO_PI, ensemble, out_dir, parser
from nvccdd import io as nio
from nvccdd.analysis import field_to_rabi, signal_to_field
from nvccdd.pipeline import simulate_calibration
from nvccdd.protocols import ProtocolSpec, Sampling, measure_response_curve
from nvccdd.spin import DriveConfig, TargetSignal

OMEGA1 = TWO_PI * 11.3e6
OMEGA2 = OMEGA1 / 10


def main():
    ap = parser(__doc__)
    ap.add_argument("--field", type=float, default=2.2e-6, help="injected target field (T)")
    ap.add_argument("--tau", type=float, default=67e-6, help="interaction time (s)")
    args = ap.parse_args()
    out, ens = out_dir(args), ensemble(args)
    spec = ProtocolSpec("ccdd-mag", SYSTEM, DriveConfig(OMEGA1, OMEGA2),
                        Sampling(TWO_PI / OMEGA2, 200),
                        target=TargetSignal(0.0, SYSTEM.omega0 - OMEGA2))
    volts_per_rabi = 1 / (TWO_PI * 61.4e6)  # 1 mV drives a 61.4 kHz target Rabi frequency
    v_op = field_to_rabi(args.field) * volts_per_rabi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        run = simulate_calibration(spec, ens, args.tau, volts_per_rabi,
                                   np.array([1, 1.5, 2, 2.5, 3]) * 1e-3,
                                   v_op * (1 + np.linspace(-0.03, 0.03, 13)))
        s = measure_response_curve(spec, ens, run.tau, [field_to_rabi(args.field)]).signal[0]
    est = signal_to_field(s, run.result)
    nio.write_table(out / "freq_vs_amp.csv", ["amplitude_v", "frequency_hz"], list(run.freq_vs_amp.T))
    nio.write_table(out / "response.csv", ["amplitude_v", "signal"], list(run.response.T))
    nio.write_json(out / "calibration.json", run.result.as_dict())
    print(f"tau = {run.tau * 1e6:.4f} us")
    print(f"a = {run.result.a / 1e6:.2f} kHz/mV, R = {run.result.R:.3g} /V")
    print(f"B_t = {est.value * 1e9:.0f} nT (injected {args.field * 1e9:.0f} nT, "
          f"{est.value / args.field - 1:+.2%})")


if __name__ == "__main__":
    main()
