"""EE and PFE profiles for European and Bermudan puts on shared paths.

The Bermudan profile collapses towards maturity because paths deep in the
money exercise early and carry no exposure afterwards.
"""

from chebexposure import ExposureConfig, ModelSpec, ProductSpec, run_exposure_many


def main(M=50_000, seed=1):
    eur, berm = run_exposure_many(
        [ProductSpec("european_put"), ProductSpec("bermudan_put")],
        ModelSpec.black_scholes(),
        ExposureConfig(M=M, seed=seed),
    )
    print(f"{'t':>6}  {'EE eur':>8}  {'PFE eur':>8}  {'EE berm':>8}  {'PFE berm':>8}")
    for u in range(0, 53, 4):
        print(f"{eur.grid[u]:6.3f}  {eur.ee[u]:8.4f}  {eur.pfe[u]:8.4f}  {berm.ee[u]:8.4f}  {berm.pfe[u]:8.4f}")
    print(f"terminal EE ratio Bermudan/European: {berm.ee[-1] / eur.ee[-1]:.3f}")
    print("phase timings (s):", {k: round(v, 3) for k, v in berm.timings.items()})


if __name__ == "__main__":
    main()
