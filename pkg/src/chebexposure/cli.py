"""Command-line front end: ``price``, ``exposure`` and ``compare``.

Exit codes: 0 success, 2 configuration or output error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import PRESETS, ConfigError, RunConfig, resolve
from .exposure import ExposureProfile, run_exposure, run_exposure_many
from .moments import QuadratureError
from .pricer import NumericalFailure, price, solve, spot_greeks

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _flags(args) -> dict:
    flags: dict = {}
    if args.seed is not None:
        flags.setdefault("simulation", {})["seed"] = args.seed
    if args.paths is not None:
        flags.setdefault("simulation", {})["M"] = args.paths
    if args.out is not None:
        flags.setdefault("output", {})["dir"] = args.out
    if args.format is not None:
        flags.setdefault("output", {})["formats"] = args.format
    return flags


def _label(cfg: RunConfig) -> str:
    p = cfg.product
    return f"{p.kind.value}_n{p.n_dates}" + (f"_B{p.barrier:g}" if p.barrier is not None else "")


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"output.dir: cannot write {path}: {exc.strerror}") from exc


def cmd_price(cfg: RunConfig) -> dict:
    ec = cfg.exposure
    sol = solve(cfg.product, cfg.model, ec.N, ec.domain, ec.backend, ec.smoothing, ec.m_pre, ec.seed)
    x0 = math.log(ec.s0)
    report = {"model": cfg.model.to_dict(), "product": cfg.product.to_dict(), "s0": ec.s0,
              "N": sol.N, "domain": [sol.domain.lo, sol.domain.hi], "price": float(price(sol, 0, x0))}
    if sol.domain.lo < x0 < sol.domain.hi:
        d, g = spot_greeks(sol, 0, ec.s0)
        report["delta"], report["gamma"] = float(d), float(g)
    print(f"price  {report['price']:.10g}")
    if "delta" in report:
        print(f"delta  {report['delta']:.10g}")
        print(f"gamma  {report['gamma']:.10g}")
    if "json" in cfg.formats:
        _write(cfg.output_dir / f"price_{_label(cfg)}.json", json.dumps(report, indent=2))
    return report


def _print_timings(prof: ExposureProfile) -> None:
    for name, secs in prof.timings.items():
        print(f"{name:<16}{secs:8.3f} s")


def cmd_exposure(cfg: RunConfig) -> ExposureProfile:
    prof = run_exposure(cfg.product, cfg.model, cfg.exposure)
    label = _label(cfg)
    if "csv" in cfg.formats:
        _write(cfg.output_dir / f"exposure_{label}.csv", prof.to_csv())
    if "json" in cfg.formats:
        _write(cfg.output_dir / f"exposure_{label}.json", prof.to_json())
    print(f"price  {prof.price_t0:.10g}")
    print(f"EE(T)  {prof.ee[-1]:.10g}")
    print(f"PFE(T) {prof.pfe[-1]:.10g}")
    _print_timings(prof)
    return prof


def cmd_compare(cfgs: list[RunConfig]) -> list[ExposureProfile]:
    first = cfgs[0]
    for c in cfgs[1:]:
        if c.model != first.model:
            raise ConfigError("model: compared configurations must share the model")
        if c.exposure != first.exposure:
            raise ConfigError("simulation: compared configurations must share numerics, paths and seed")
    profiles = run_exposure_many([c.product for c in cfgs], first.model, first.exposure)
    labels = [_label(c) for c in cfgs]
    grid = np.unique(np.concatenate([p.grid for p in profiles]))
    header = ["t"] + [f"{col}_{lab}" for lab in labels for col in ("EE", "PFE")]
    rows = [",".join(header)]
    for t in grid:
        cells = [f"{t:.10g}"]
        for p in profiles:
            hit = np.flatnonzero(np.abs(p.grid - t) <= 1e-9)
            cells += [f"{p.ee[hit[0]]:.10g}", f"{p.pfe[hit[0]]:.10g}"] if hit.size else ["", ""]
        rows.append(",".join(cells))
    summary = ["product,V0,EE_T,PFE_T"] + [
        f"{lab},{p.price_t0:.10g},{p.ee[-1]:.10g},{p.pfe[-1]:.10g}" for lab, p in zip(labels, profiles)
    ]
    if "csv" in first.formats:
        _write(first.output_dir / "compare_profiles.csv", "\n".join(rows) + "\n")
        _write(first.output_dir / "compare_summary.csv", "\n".join(summary) + "\n")
    if "json" in first.formats:
        _write(first.output_dir / "compare.json",
               json.dumps({lab: p.to_dict() for lab, p in zip(labels, profiles)}, indent=2))
    width = max(len(lab) for lab in labels)
    print(f"{'product':<{width}}  {'V0':>10}  {'EE at T':>10}  {'PFE at T':>10}")
    for lab, p in zip(labels, profiles):
        print(f"{lab:<{width}}  {p.price_t0:10.4f}  {p.ee[-1]:10.4f}  {p.pfe[-1]:10.4f}")
    _print_timings(profiles[0])
    return profiles


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chebexposure", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        if multi:
            p.add_argument("--config", action="append", default=[], help="JSON config file (repeatable)")
            p.add_argument("--preset", action="append", default=[], choices=sorted(PRESETS),
                           metavar="NAME", help="built-in preset (repeatable)")
        else:
            p.add_argument("--config", help="JSON config file")
            p.add_argument("--preset", choices=sorted(PRESETS), metavar="NAME", help="built-in preset")
        p.add_argument("--seed", type=int)
        p.add_argument("--paths", type=int, help="number of simulated paths M")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=["csv", "json", "both"])

    common(sub.add_parser("price", help="price and Greeks at t0"))
    common(sub.add_parser("exposure", help="EE and PFE profile"))
    common(sub.add_parser("compare", help="several products on shared paths"), multi=True)
    sub.add_parser("presets", help="list built-in presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name in sorted(PRESETS):
            print(name)
        return EXIT_OK
    try:
        flags = _flags(args)
        if args.command == "compare":
            sources = [(p, None) for p in args.preset] + [(None, f) for f in args.config]
            if not sources:
                raise ConfigError("compare: give at least one --preset or --config")
            cmd_compare([resolve(p, f, flags) for p, f in sources])
        else:
            if args.preset is None and args.config is None:
                raise ConfigError(f"{args.command}: give --preset or --config")
            cfg = resolve(args.preset, args.config, flags)
            (cmd_price if args.command == "price" else cmd_exposure)(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, QuadratureError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # parameter validation inside the library (e.g. an impossible domain)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
