"""How the number of exercise dates drives the price and the terminal exposure.

More exercise dates raise the price towards the American value, and each
extra date gives in-the-money paths another chance to stop, so the exposure
left at maturity shrinks.
"""

from chebexposure import ExposureConfig, ModelSpec, ProductSpec, run_exposure_many


def main(M=50_000, seed=1):
    products = [ProductSpec("european_put")] + [ProductSpec("bermudan_put", n_dates=n) for n in (4, 12, 36, 84, 252)]
    profiles = run_exposure_many(products, ModelSpec.black_scholes(), ExposureConfig(M=M, seed=seed))
    print(f"{'product':<16}{'V0':>8}{'EE at T':>10}{'PFE at T':>10}")
    for prod, prof in zip(products, profiles):
        name = "European" if prod.kind.value == "european_put" else f"Bermudan n={prod.n_dates}"
        print(f"{name:<16}{prof.price_t0:8.4f}{prof.ee[-1]:10.4f}{prof.pfe[-1]:10.4f}")


if __name__ == "__main__":
    main()
