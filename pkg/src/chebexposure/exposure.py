"""Credit exposure along real-world paths from dynamic Chebyshev value functions.

Each path is priced at every exposure date by evaluating the stored
interpolants; no nested simulation is needed. Bermudan paths stop at the
first exercise (the exercised payoff is the exposure on that date, zero
afterwards) and barrier paths stop when the underlying is above the barrier on
a monitoring date.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cheb import ChebDomain, ChebPoly, chebvander_t
from .models import Measure, ModelSpec, PathSet, simulate_paths
from .pricer import (
    EXERCISE_TOL,
    DCSolution,
    ProductKind,
    ProductSpec,
    TransitionEngine,
    backward_induction,
    default_backend,
    default_degree,
    default_domain,
    extension_value,
    payoff,
)

DAYS_PER_YEAR = 252
_CHUNK = 16384
# exposure dates closer than this (in years) to an exercise date are snapped to it
_DATE_TOL = 1e-9


# ---------------------------------------------------------------------------
# exposure dates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExposureDate:
    """Value function at one exposure date.

    ``exercise_index`` is the position among the product dates when ``t`` is an
    exercise/monitoring date, else ``None``. ``value`` is ``None`` at maturity
    (the payoff is used exactly).
    """

    t: float
    tau: float
    value: ChebPoly | None
    continuation: ChebPoly | None = None
    exercise_index: int | None = None

    @property
    def is_monitoring(self) -> bool:
        return self.exercise_index is not None and self.exercise_index > 0


def exposure_grid(product: ProductSpec, kind: str = "exercise", days_per_year: int = DAYS_PER_YEAR) -> np.ndarray:
    """Exercise dates, or their union with a daily grid."""
    dates = product.dates
    if kind == "exercise":
        return dates.copy()
    if kind != "daily":
        raise ValueError(f"exposure grid must be 'exercise' or 'daily', got {kind!r}")
    n_days = int(round(product.maturity * days_per_year))
    daily = product.maturity * np.arange(n_days + 1) / n_days
    far = np.min(np.abs(daily[:, None] - dates[None, :]), axis=1) > _DATE_TOL
    return np.union1d(dates, daily[far])


def exposure_dates(
    solution: DCSolution,
    grid=None,
    engine: TransitionEngine | None = None,
    smoothing: bool = True,
) -> list[ExposureDate]:
    """Value interpolants on ``grid`` (default: the exercise dates).

    Between exercise dates the value is a European-style expectation of the
    next exercise date's value function over the remaining time, which needs a
    fractional-step Gamma from ``engine``. On the last interval the payoff is
    valued directly when ``smoothing`` is on.
    """
    product = solution.product
    dates = solution.dates
    grid = dates if grid is None else np.asarray(grid, dtype=float)
    n = product.n_dates
    out: list[ExposureDate] = []
    nodes = solution.domain.nodes(solution.N)
    for t in grid:
        tau = max(product.maturity - t, 0.0)
        hit = np.flatnonzero(np.abs(dates - t) <= _DATE_TOL)
        if hit.size:
            u = int(hit[0])
            if u == n:
                out.append(ExposureDate(float(dates[u]), 0.0, None, None, u))
            else:
                out.append(ExposureDate(float(dates[u]), tau, solution.value_polys[u],
                                        solution.continuation_polys[u], u))
            continue
        if engine is None:
            raise ValueError("off-exercise exposure dates need a TransitionEngine")
        v = int(np.searchsorted(dates, t))
        step = float(dates[v] - t)
        disc = math.exp(-solution.r * step)
        if v == n and smoothing:
            nodal = engine.expected_payoff(product, step)
        else:
            target = ChebPoly.from_values(solution.domain, payoff(product, nodes)) if v == n \
                else solution.value_polys[v]
            nodal = disc * (engine.gamma(step).gamma @ target.coeffs)
        out.append(ExposureDate(float(t), tau, ChebPoly.from_values(solution.domain, nodal)))
    return out


# ---------------------------------------------------------------------------
# path evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExposureMatrix:
    """``M x n_dates`` exposures and the pre-exercise / not-knocked-out flags."""

    e: np.ndarray = field(repr=False)
    alive: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        e = np.asarray(self.e, dtype=float)
        alive = np.asarray(self.alive, dtype=bool)
        if e.shape != alive.shape or e.ndim != 2:
            raise ValueError("e and alive must be matching 2-d arrays")
        if np.any(e < 0):
            raise ValueError("exposures must be non-negative")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "alive", alive)

    @property
    def n_paths(self) -> int:
        return self.e.shape[0]


def _evaluate_date(solutions, dates_u, x):
    """Values and continuations of several products at one date, sharing the basis per domain."""
    groups: dict[tuple, list[int]] = {}
    for i, (sol, d) in enumerate(zip(solutions, dates_u)):
        if d.value is not None:
            groups.setdefault((sol.domain, sol.N), []).append(i)
    values = [None] * len(solutions)
    conts = [None] * len(solutions)
    for (domain, N), idx in groups.items():
        inside = domain.contains(x)
        cols = []
        for i in idx:
            cols.append(dates_u[i].value.coeffs)
            if dates_u[i].continuation is not None:
                cols.append(dates_u[i].continuation.coeffs)
        basis = chebvander_t(domain.to_unit(x[inside]), N)
        evaluated = (np.vstack(cols) @ basis).T
        c = 0
        for i in idx:
            v = np.empty(x.shape)
            v[inside] = evaluated[:, c]
            c += 1
            if np.any(~inside):
                v[~inside] = extension_value(solutions[i].product, x[~inside], dates_u[i].tau,
                                             solutions[i].r, domain)
            values[i] = v
            if dates_u[i].continuation is not None:
                cont = np.full(x.shape, np.nan)
                cont[inside] = evaluated[:, c]
                c += 1
                conts[i] = cont
    return values, conts


def _apply_exposure_rule(product: ProductSpec, d: ExposureDate, domain: ChebDomain, x, value, cont):
    """Exposure on one date for alive paths and the mask of paths that stop there."""
    if d.value is None:
        g = payoff(product, x)
        stop = g > 0 if product.kind is ProductKind.BERMUDAN_PUT else np.zeros(x.shape, bool)
        if product.kind is ProductKind.BARRIER_UP_OUT_CALL:
            stop = x > product.log_barrier
        return np.maximum(g, 0.0), stop
    if product.kind is ProductKind.BARRIER_UP_OUT_CALL:
        value = np.where(x > product.log_barrier, 0.0, value)
    e = np.maximum(value, 0.0)
    stop = np.zeros(x.shape, bool)
    if not d.is_monitoring:
        return e, stop
    if product.kind is ProductKind.BERMUDAN_PUT:
        g = payoff(product, x)
        inside = domain.contains(x)
        ex = np.where(inside, g >= np.where(inside, cont, 0.0) - EXERCISE_TOL, x < domain.lo) & (g > 0)
        return np.where(ex, g, e), ex
    if product.kind is ProductKind.BARRIER_UP_OUT_CALL:
        ko = x > product.log_barrier
        return np.where(ko, 0.0, e), ko
    return e, stop


def path_exposures_many(
    solutions: Sequence[DCSolution],
    paths: PathSet,
    dates: Sequence[Sequence[ExposureDate]] | None = None,
    columns: Sequence[np.ndarray] | None = None,
) -> list[ExposureMatrix]:
    """Exposure matrices for several products on shared paths.

    ``dates[i]`` are the exposure dates of product ``i`` (default: its exercise
    dates) and ``columns[i]`` the matching column indices into ``paths``.
    Basis polynomials are evaluated once per path chunk, date and domain.
    """
    if dates is None:
        dates = [exposure_dates(s) for s in solutions]
    if columns is None:
        columns = []
        for d in dates:
            ts = np.array([x.t for x in d])
            if ts.size != paths.grid.size or np.any(np.abs(ts - paths.grid) > _DATE_TOL):
                raise ValueError("path grid does not match the product dates")
            columns.append(np.arange(ts.size))
    M = paths.n_paths
    e = [np.zeros((M, len(d))) for d in dates]
    alive = [np.ones((M, len(d)), bool) for d in dates]

    # union of the path columns used by any product, evaluated in increasing time order
    needed = np.unique(np.concatenate(columns))
    where = [{int(c): j for j, c in enumerate(cols)} for cols in columns]
    for start in range(0, M, _CHUNK):
        rows = slice(start, min(start + _CHUNK, M))
        running = [np.ones(rows.stop - rows.start, bool) for _ in solutions]
        for col in needed:
            x = paths.values[rows, col]
            active = [i for i in range(len(solutions)) if int(col) in where[i]]
            dates_u = [dates[i][where[i][int(col)]] for i in active]
            values, conts = _evaluate_date([solutions[i] for i in active], dates_u, x)
            for k, i in enumerate(active):
                j = where[i][int(col)]
                ej, stop = _apply_exposure_rule(solutions[i].product, dates_u[k], solutions[i].domain,
                                                x, values[k], conts[k])
                e[i][rows, j] = np.where(running[i], ej, 0.0)
                running[i] = running[i] & ~stop
                alive[i][rows, j] = running[i]
    return [ExposureMatrix(a, b) for a, b in zip(e, alive)]


def path_exposures(solution: DCSolution, paths: PathSet) -> ExposureMatrix:
    """Exposures of one product on paths simulated on its exercise dates."""
    return path_exposures_many([solution], paths)[0]


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def expected_exposure(em: ExposureMatrix) -> np.ndarray:
    if em.n_paths < 1:
        raise ValueError("need at least one path")
    return em.e.mean(axis=0)


def pfe(em: ExposureMatrix, alpha: float) -> np.ndarray:
    """Per-date ``ceil(alpha M)``-th smallest exposure."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    M = em.n_paths
    if M < 1:
        raise ValueError("need at least one path")
    # round first so that e.g. 0.9 * 50000 = 45000.000000000007 gives 45000
    k = max(math.ceil(round(alpha * M, 9)), 1)
    return np.partition(em.e, k - 1, axis=0)[k - 1]


# ---------------------------------------------------------------------------
# end to end
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExposureConfig:
    """Numerical settings of an exposure run; ``None`` picks the product default."""

    N: int | None = None
    domain: ChebDomain | None = None
    backend: str | None = None
    m_pre: int = 100_000
    M: int = 50_000
    seed: int = 1
    alpha: float = 0.975
    grid: str = "exercise"
    s0: float = 100.0
    smoothing: bool = True

    def __post_init__(self) -> None:
        if int(self.M) < 1:
            raise ValueError("M must be at least 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.grid not in ("exercise", "daily"):
            raise ValueError("grid must be 'exercise' or 'daily'")
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")
        if self.N is not None and int(self.N) < 2:
            raise ValueError("N must be at least 2")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class ExposureProfile:
    grid: np.ndarray
    ee: np.ndarray
    pfe: np.ndarray
    alpha: float
    price_t0: float
    m_paths: int
    seed: int
    ee_se: np.ndarray | None = None
    timings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_csv(self, path: str | Path | None = None) -> str:
        lines = ["t,EE,PFE"]
        lines += [f"{t:.10g},{a:.10g},{b:.10g}" for t, a, b in zip(self.grid, self.ee, self.pfe)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_dict(self) -> dict:
        return {
            "price_t0": self.price_t0,
            "alpha": self.alpha,
            "m_paths": self.m_paths,
            "seed": self.seed,
            "grid": self.grid.tolist(),
            "ee": self.ee.tolist(),
            "pfe": self.pfe.tolist(),
            "timings": self.timings,
            **self.meta,
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def run_exposure_many(
    products: Sequence[ProductSpec],
    model: ModelSpec,
    config: ExposureConfig = ExposureConfig(),
) -> list[ExposureProfile]:
    """Price several products and compute their profiles on one shared path set.

    Products with the same domain and degree share one pre-computation. Phase
    timings follow the split simulation / pre-computation / time-stepping.
    """
    products = list(products)
    if not products:
        raise ValueError("no products given")
    t_start = time.perf_counter()
    grids = [exposure_grid(p, config.grid) for p in products]
    union = grids[0]
    for g in grids[1:]:
        union = np.union1d(union, g)
    # merge dates that differ only by roundoff
    union = union[np.concatenate([[True], np.diff(union) > _DATE_TOL])]
    columns = [np.array([int(np.argmin(np.abs(union - t))) for t in g]) for g in grids]

    t0 = time.perf_counter()
    paths = simulate_paths(model, Measure.P, math.log(config.s0), union, config.M, config.seed)
    t_sim = time.perf_counter() - t0

    # pre-computation: Gamma, one-period payoff expectations, fractional steps
    t0 = time.perf_counter()
    engines: dict[tuple, TransitionEngine] = {}
    setups = []
    for p in products:
        N = config.N or default_degree(p)
        domain = config.domain or default_domain(p, model)
        key = (domain, N)
        if key not in engines:
            engines[key] = TransitionEngine(model, domain, N, config.backend or default_backend(model),
                                            m_pre=config.m_pre, seed=config.seed)
        eng = engines[key]
        sharing = [q for q in products if (config.domain or default_domain(q, model), config.N or default_degree(q)) == key]
        eng.prepare(p.dt, sharing)
        terminal = eng.expected_payoff(p, p.dt) if config.smoothing else None
        setups.append((p, eng, terminal))
    t_pre = time.perf_counter() - t0

    t0 = time.perf_counter()
    solutions = [
        backward_induction(p, model, eng.domain, eng.N, eng.gamma(p.dt), config.smoothing,
                           terminal=None if term is None else [term])
        for p, eng, term in setups
    ]
    t_back = time.perf_counter() - t0

    # off-exercise dates need fractional-step Gammas; that is pre-computation work
    t0 = time.perf_counter()
    dates = [exposure_dates(sol, g, eng, config.smoothing) for sol, g, (_, eng, _) in zip(solutions, grids, setups)]
    t_pre += time.perf_counter() - t0

    t0 = time.perf_counter()
    matrices = path_exposures_many(solutions, paths, dates, columns)
    t_step = t_back + time.perf_counter() - t0
    total = time.perf_counter() - t_start

    profiles = []
    x0 = math.log(config.s0)
    for p, sol, em, g, dts in zip(products, solutions, matrices, grids, dates):
        d0 = dts[0]
        price0 = float(em.e[0, 0]) if d0.value is None else float(
            d0.value(x0) if sol.domain.contains(x0) else extension_value(p, x0, p.maturity, model.r, sol.domain)
        )
        profiles.append(
            ExposureProfile(
                grid=g,
                ee=expected_exposure(em),
                pfe=pfe(em, config.alpha),
                alpha=config.alpha,
                price_t0=price0,
                m_paths=config.M,
                seed=config.seed,
                ee_se=em.e.std(axis=0, ddof=1) / math.sqrt(em.n_paths) if em.n_paths > 1 else None,
                timings={
                    "Simulation": t_sim,
                    "Pre-computation": t_pre,
                    "Time-stepping": t_step,
                    "Total": total,
                },
                meta={
                    "model": model.to_dict(),
                    "product": p.to_dict(),
                    "N": sol.N,
                    "domain": [sol.domain.lo, sol.domain.hi],
                    "backend": engines[(sol.domain, sol.N)].backend,
                    "grid_kind": config.grid,
                },
            )
        )
    return profiles


def run_exposure(product: ProductSpec, model: ModelSpec, config: ExposureConfig = ExposureConfig()) -> ExposureProfile:
    """Simulate, pre-compute, run backward induction and aggregate EE and PFE."""
    return run_exposure_many([product], model, config)[0]
