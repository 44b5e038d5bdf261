"""Mixed-cost optimum across winding branches and rate weights.

For each omega, lists the cost of the cosh pulse on branches n = -2..2 and
marks the cheapest one. Output is CSV.
"""

import argparse

from bloch_pulse.costs import fluence, geometric_cost, mixed_cost, rate_cost
from bloch_pulse.pulses import pulse_b3


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--theta", type=float, default=2.5)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--omegas", default="0.1,1,5,20,100")
    p.add_argument("--branches", default="-2,-1,0,1,2")
    args = p.parse_args()
    branches = [int(x) for x in args.branches.split(",")]
    print("omega,n,fluence,rate_cost,mixed_cost,geometric_cost,best")
    for omega in (float(x) for x in args.omegas.split(",")):
        rows = []
        for n in branches:
            prof = pulse_b3(args.theta, n, omega)
            rows.append((n, fluence(prof), rate_cost(prof), mixed_cost(prof, args.a, omega), geometric_cost(prof, args.a, omega)))
        best = min(rows, key=lambda r: r[3])[0]
        for n, fl, rc, mc, gc in rows:
            print(f"{omega:g},{n},{fl:.10g},{rc:.10g},{mc:.10g},{gc:.10g},{int(n == best)}")


if __name__ == "__main__":
    main()
