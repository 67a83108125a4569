"""Price European, Bermudan and barrier options with the Chebyshev engine.

Run with ``python demos/01_pricing.py``. Each price is printed next to an
independent reference where one exists.
"""

import math

from scipy.special import ndtr

from chebexposure import ModelSpec, ProductSpec, price, solve, spot_greeks

S0, K, R, SIGMA, T = 100.0, 100.0, 0.03, 0.25, 1.0
X0 = math.log(S0)


def bs_put(s, k, r, sigma, tau):
    sd = sigma * math.sqrt(tau)
    d1 = (math.log(s / k) + (r + 0.5 * sigma**2) * tau) / sd
    return k * math.exp(-r * tau) * ndtr(sd - d1) - s * ndtr(-d1)


def main():
    bs = ModelSpec.black_scholes()

    eur = solve(ProductSpec("european_put"), bs)
    print(f"European put, Black-Scholes   {price(eur, 0, X0):.5f}   closed form {bs_put(S0, K, R, SIGMA, T):.5f}")

    # The same value function carries the Greeks: differentiate the interpolant.
    delta, gamma = spot_greeks(eur, 0, S0)
    print(f"  delta {delta:.5f}   gamma {gamma:.6f}   closed-form delta {ndtr((R + 0.5 * SIGMA**2) / SIGMA) - 1:.5f}")

    berm = solve(ProductSpec("bermudan_put"), bs)
    print(f"Bermudan put, 52 dates        {price(berm, 0, X0):.5f}   (early exercise premium "
          f"{price(berm, 0, X0) - price(eur, 0, X0):.4f})")

    barrier = solve(ProductSpec("barrier_up_out_call", barrier=150.0), bs)
    call = solve(ProductSpec("european_call"), bs)
    print(f"Up-and-out call, B=150        {price(barrier, 0, X0):.5f}   vanilla call {price(call, 0, X0):.5f}")

    merton = ModelSpec.merton()
    print(f"European put, Merton          {price(solve(ProductSpec('european_put'), merton), 0, X0):.5f}")
    print(f"Bermudan put, Merton          {price(solve(ProductSpec('bermudan_put'), merton), 0, X0):.5f}")

    # CEV has no characteristic function; Gamma is estimated by simulation.
    cev = ModelSpec.cev()
    print(f"European put, CEV (simulated Gamma)  {price(solve(ProductSpec('european_put'), cev), 0, X0):.4f}")


if __name__ == "__main__":
    main()
