"""Exposure on a daily grid between weekly exercise dates.

Between exercise dates the value is the discounted expectation of the next
exercise date's value function, using a Gamma matrix for the fractional step.
Knock-out is checked only on monitoring dates, so a path that is above the
barrier between two of them still carries exposure until the next one.
Within a few days of maturity the value function is close to the payoff kink
and the fixed-degree interpolant resolves it only coarsely.
"""

import numpy as np

from chebexposure import ExposureConfig, ModelSpec, ProductSpec, run_exposure


def main(M=20_000, seed=2):
    bs = ModelSpec.black_scholes()
    barrier = ProductSpec("barrier_up_out_call", barrier=150.0)
    prof = run_exposure(barrier, bs, ExposureConfig(M=M, seed=seed, grid="daily"))
    weekly = np.isclose((prof.grid * 52) % 1, 0, atol=1e-9) | np.isclose((prof.grid * 52) % 1, 1, atol=1e-9)
    print(f"{prof.grid.size} exposure dates, {weekly.sum()} of them monitoring dates")
    print(f"{'t':>7}  {'EE':>8}  {'PFE':>8}  monitoring")
    for t, ee, p, w in list(zip(prof.grid, prof.ee, prof.pfe, weekly))[-22:]:
        print(f"{t:7.4f}  {ee:8.4f}  {p:8.4f}  {'yes' if w else ''}")


if __name__ == "__main__":
    main()
