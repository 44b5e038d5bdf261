"""Rate cost of the sine pulse relative to the optimal parabolic pulse."""

import argparse
import math

from bloch_pulse.costs import SINE_TO_PARABOLIC_RATE, fluence, rate_cost
from bloch_pulse.pulses import pulse_b2, pulse_sine


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--thetas", default="0.7854,1.5708,2.5")
    p.add_argument("--n", type=int, default=0)
    args = p.parse_args()
    print("theta,rate_b2,rate_sine,ratio,fluence_b2,fluence_sine")
    for theta in (float(x) for x in args.thetas.split(",")):
        b2, sine = pulse_b2(theta, args.n), pulse_sine(theta, args.n)
        r2, rs = rate_cost(b2), rate_cost(sine)
        print(f"{theta:.6g},{r2:.10g},{rs:.10g},{rs / r2:.10g},{fluence(b2):.10g},{fluence(sine):.10g}")
    print(f"# exact ratio pi^4/96 = {SINE_TO_PARABOLIC_RATE:.10g} ({100 * (SINE_TO_PARABOLIC_RATE - 1):.2f}% above)")


if __name__ == "__main__":
    main()
