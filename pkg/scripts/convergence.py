"""Grid refinement study: RK4 arrival error and discrete minimizer error."""

import argparse
import math

import numpy as np

from bloch_pulse.dynamics import propagate
from bloch_pulse.oracle import direct_discrete_minimizer
from bloch_pulse.pulses import pulse_b2, pulse_b3, synthesize


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--theta", type=float, default=math.pi / 2)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--family", default="b2", choices=("b1", "b2", "b3"))
    args = p.parse_args()
    s_i = np.array([0.0, 0.0, 1.0])
    s_f = np.array([math.sin(args.theta), 0.0, math.cos(args.theta)])
    pulse = synthesize(s_i, s_f, args.family, args.n)

    print("# RK4 arrival error")
    print("grid_n,final_error,ratio")
    prev = None
    for grid in (16, 32, 64, 128, 256, 512):
        err = propagate(s_i, pulse.schedule(grid), target=s_f).final_error
        print(f"{grid},{err:.3e},{'' if prev is None else f'{prev / err:.2f}'}")
        prev = err

    print("# discrete minimizer max error")
    print("criterion,grid_m,max_error,ratio")
    for criterion, exact in (("rate", pulse_b2(args.theta)), ("mixed", pulse_b3(args.theta, 0, 5.0))):
        prev = None
        for m in (5, 9, 17, 33):
            t, b = direct_discrete_minimizer(criterion, args.theta, grid_m=m)
            err = float(np.max(np.abs(b - exact.value(t))))
            print(f"{criterion},{m},{err:.3e},{'' if prev is None else f'{prev / err:.2f}'}")
            prev = err


if __name__ == "__main__":
    main()
