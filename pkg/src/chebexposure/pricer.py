"""Dynamic Chebyshev backward induction for European, Bermudan and barrier products.

At every date the value function is stored as a Chebyshev interpolant on a
fixed log-price domain. Stepping back one period only needs the pre-computed
matrix ``Gamma`` (see :mod:`chebexposure.moments`)::

    continuation(x_k) = D * sum_j c_j(t_{u+1}) Gamma[k, j],   D = exp(-r dt)

followed by the product rule (max with the payoff, pass-through, or knock-out
indicator) and a fresh coefficient transform.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .cheb import ChebDomain, ChebPoly, coefficients
from .models import ModelSpec, ModelTag, q_char_fn
from .moments import (
    FourierQuadrature,
    IncrementDensity,
    MomentMatrix,
    gamma_fourier,
    gamma_normal,
    mc_pass,
)

EXERCISE_TOL = 1e-10


class ProductKind(str, enum.Enum):
    EUROPEAN_CALL = "european_call"
    EUROPEAN_PUT = "european_put"
    BERMUDAN_PUT = "bermudan_put"
    BARRIER_UP_OUT_CALL = "barrier_up_out_call"


@dataclass(frozen=True)
class ProductSpec:
    """Option contract. ``n_dates`` equally spaced exercise/monitoring dates on ``(0, T]``."""

    kind: ProductKind
    strike: float = 100.0
    maturity: float = 1.0
    n_dates: int = 52
    barrier: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProductKind(self.kind))
        if not self.strike > 0:
            raise ValueError("strike must be positive")
        if not self.maturity > 0:
            raise ValueError("maturity must be positive")
        if int(self.n_dates) != self.n_dates or self.n_dates < 1:
            raise ValueError("n_dates must be a positive integer")
        object.__setattr__(self, "n_dates", int(self.n_dates))
        if self.kind is ProductKind.BARRIER_UP_OUT_CALL:
            if self.barrier is None:
                raise ValueError("barrier product requires a barrier level")
            if not self.barrier > self.strike:
                raise ValueError("up-and-out call requires barrier > strike")
        elif self.barrier is not None:
            raise ValueError(f"{self.kind.value} takes no barrier")

    @property
    def dt(self) -> float:
        return self.maturity / self.n_dates

    @property
    def dates(self) -> np.ndarray:
        return self.maturity * np.arange(self.n_dates + 1) / self.n_dates

    @property
    def log_barrier(self) -> float:
        return math.log(self.barrier) if self.barrier is not None else math.inf

    @property
    def is_put(self) -> bool:
        return self.kind in (ProductKind.EUROPEAN_PUT, ProductKind.BERMUDAN_PUT)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "strike": self.strike,
            "maturity": self.maturity,
            "n_dates": self.n_dates,
            "barrier": self.barrier,
        }


def payoff(product: ProductSpec, x):
    """Exercise value at log-price ``x`` (vectorised)."""
    s = np.exp(np.asarray(x, dtype=float))
    K = product.strike
    if product.is_put:
        out = np.maximum(K - s, 0.0)
    else:
        out = np.maximum(s - K, 0.0)
        if product.kind is ProductKind.BARRIER_UP_OUT_CALL:
            out = np.where(np.asarray(x) > product.log_barrier, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


PUT_DOMAIN = (math.log(0.2), math.log(350.0))
BARRIER_LOWER = math.log(10.0)


def default_domain(product: ProductSpec, model: ModelSpec | None = None) -> ChebDomain:
    if product.kind is ProductKind.BARRIER_UP_OUT_CALL:
        return ChebDomain(BARRIER_LOWER, product.log_barrier)
    return ChebDomain(*PUT_DOMAIN)


def default_degree(product: ProductSpec) -> int:
    return 40 if product.kind is ProductKind.BARRIER_UP_OUT_CALL else 150


def default_backend(model: ModelSpec) -> str:
    return {
        ModelTag.BLACK_SCHOLES: "analytic",
        ModelTag.MERTON: "fourier",
        ModelTag.CEV: "monte_carlo",
    }[model.tag]


def extension_value(product: ProductSpec, x, tau: float, r: float, domain: ChebDomain):
    """Closed-form value outside the interpolation domain.

    ``tau`` is the time to maturity. Puts vanish above the domain; below it a
    Bermudan is exercised and a European put is worth ``K e^{-r tau} - e^x``.
    Calls mirror this; the up-and-out call is worth nothing outside.
    """
    x = np.asarray(x, dtype=float)
    if np.any(domain.contains(x)):
        raise ValueError("extension_value called for a point inside the domain")
    below = x < domain.lo
    K = product.strike
    kind = product.kind
    if kind is ProductKind.BERMUDAN_PUT:
        out = np.where(below, payoff(product, x), 0.0)
    elif kind is ProductKind.EUROPEAN_PUT:
        out = np.where(below, K * math.exp(-r * tau) - np.exp(x), 0.0)
    elif kind is ProductKind.EUROPEAN_CALL:
        out = np.where(below, 0.0, np.exp(x) - K * math.exp(-r * tau))
    else:
        out = np.zeros_like(x)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# one-period expectations (smoothing of the first backward step)
# ---------------------------------------------------------------------------

def _bs_call(s, k, r, sigma, tau):
    sd = sigma * math.sqrt(tau)
    d1 = (np.log(s / k) + (r + 0.5 * sigma**2) * tau) / sd
    return s * ndtr(d1) - k * math.exp(-r * tau) * ndtr(d1 - sd)


def _bs_put(s, k, r, sigma, tau):
    sd = sigma * math.sqrt(tau)
    d1 = (np.log(s / k) + (r + 0.5 * sigma**2) * tau) / sd
    return k * math.exp(-r * tau) * ndtr(sd - d1) - s * ndtr(-d1)


def _bs_one_period(product: ProductSpec, model: ModelSpec, x: np.ndarray, dt: float) -> np.ndarray:
    s = np.exp(x)
    K, r, sig = product.strike, model.r, model.sigma
    if product.is_put:
        return _bs_put(s, K, r, sig, dt)
    call = _bs_call(s, K, r, sig, dt)
    if product.kind is ProductKind.EUROPEAN_CALL:
        return call
    B = product.barrier
    sd = sig * math.sqrt(dt)
    d2_b = (np.log(s / B) + (r - 0.5 * sig**2) * dt) / sd
    # (S-K)^+ 1{S<=B} = (S-K)^+ - (S-B)^+ - (B-K) 1{S>B}
    out = call - _bs_call(s, B, r, sig, dt) - (B - K) * math.exp(-r * dt) * ndtr(d2_b)
    return np.maximum(out, 0.0)


def _payoff_cuts(product: ProductSpec) -> list[float]:
    cuts = [math.log(product.strike)]
    if product.kind is ProductKind.BARRIER_UP_OUT_CALL:
        cuts.append(product.log_barrier)
    return cuts


class TransitionEngine:
    """Pre-computation for one model on one Chebyshev grid.

    Caches ``Gamma`` per step length and supplies discounted one-period
    expectations of payoffs at the nodes (used for smoothing). Backends:
    ``analytic`` (Black-Scholes), ``fourier`` (Black-Scholes or Merton) and
    ``monte_carlo`` (any model; the payoff means reuse the Gamma draws).
    """

    def __init__(
        self,
        model: ModelSpec,
        domain: ChebDomain,
        N: int,
        backend: str | None = None,
        m_pre: int = 100_000,
        seed: int = 1,
        quad_cfg: FourierQuadrature = FourierQuadrature(),
    ):
        self.model = model
        self.domain = domain
        self.N = int(N)
        self.backend = backend or default_backend(model)
        if self.backend == "analytic" and model.tag is not ModelTag.BLACK_SCHOLES:
            raise ValueError(f"analytic backend needs conditionally normal increments, not {model.tag.value}")
        if self.backend == "fourier" and model.tag is ModelTag.CEV:
            raise ValueError("fourier backend needs a characteristic function; CEV has none")
        self.m_pre = int(m_pre)
        self.seed = int(seed)
        self.quad_cfg = quad_cfg
        self.nodes = domain.nodes(self.N)
        self._gamma: dict[float, MomentMatrix] = {}
        self._density: dict[float, IncrementDensity] = {}
        self._mc_payoffs: dict[tuple[float, ProductSpec], np.ndarray] = {}

    def _key(self, dt: float) -> float:
        return round(float(dt), 15)

    def density(self, dt: float) -> IncrementDensity:
        key = self._key(dt)
        if key not in self._density:
            self._density[key] = IncrementDensity(q_char_fn(self.model, dt), self.quad_cfg)
        return self._density[key]

    def prepare(self, dt: float, products: Sequence[ProductSpec] = ()) -> MomentMatrix:
        """Compute (and cache) Gamma for ``dt``; for Monte Carlo also the payoff means of ``products``."""
        key = self._key(dt)
        if self.backend == "monte_carlo":
            missing = [p for p in dict.fromkeys(products) if (key, p) not in self._mc_payoffs]
            if key not in self._gamma or missing:
                funcs = [lambda x, p=p: payoff(p, x) for p in missing]
                mm, means = mc_pass(self.domain, self.N, self.model, dt, self.m_pre, self.seed, funcs)
                self._gamma.setdefault(key, mm)
                for p, arr in zip(missing, means):
                    self._mc_payoffs[(key, p)] = arr
            return self._gamma[key]
        if key not in self._gamma:
            if self.backend == "analytic":
                drift = self.model.log_drift("Q")
                self._gamma[key] = gamma_normal(self.domain, self.N, drift, self.model.sigma**2, dt)
            else:
                self._gamma[key] = gamma_fourier(
                    self.domain, self.N, None, dt, self.quad_cfg, density=self.density(dt)
                )
        return self._gamma[key]

    def gamma(self, dt: float) -> MomentMatrix:
        return self.prepare(dt)

    def expected_payoff(self, product: ProductSpec, dt: float) -> np.ndarray:
        """Nodal ``exp(-r dt) E^Q[g(X_dt) | X_0 = x_k]``."""
        disc = math.exp(-self.model.r * dt)
        if self.backend == "monte_carlo":
            self.prepare(dt, [product])
            return disc * self._mc_payoffs[(self._key(dt), product)]
        if self.backend == "analytic":
            return _bs_one_period(product, self.model, self.nodes, dt)
        dens = self.density(dt)
        cuts = _payoff_cuts(product)
        g = lambda x: payoff(product, x)
        return disc * np.array([dens.expect(g, xk, cuts=cuts) for xk in self.nodes])


def smoothing_terminal_step(product: ProductSpec, engine: TransitionEngine) -> np.ndarray:
    """Nodal values at ``t_{n-1}`` computed directly from the payoff."""
    cont = engine.expected_payoff(product, product.dt)
    return _apply_rule(product, engine.nodes, cont)


def _apply_rule(product: ProductSpec, nodes: np.ndarray, cont: np.ndarray) -> np.ndarray:
    if product.kind is ProductKind.BERMUDAN_PUT:
        return np.maximum(payoff(product, nodes), cont)
    if product.kind is ProductKind.BARRIER_UP_OUT_CALL:
        return np.where(nodes <= product.log_barrier, cont, 0.0)
    return cont


# ---------------------------------------------------------------------------
# backward induction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DCSolution:
    """Value interpolants at ``t_0..t_n`` and continuation interpolants at ``t_0..t_{n-1}``."""

    product: ProductSpec
    domain: ChebDomain
    r: float
    value_polys: tuple[ChebPoly, ...] = field(repr=False)
    continuation_polys: tuple[ChebPoly, ...] = field(repr=False)

    @property
    def dates(self) -> np.ndarray:
        return self.product.dates

    @property
    def discount(self) -> float:
        return math.exp(-self.r * self.product.dt)

    @property
    def N(self) -> int:
        return self.value_polys[0].degree

    def to_json(self) -> str:
        return json.dumps(
            {
                "product": self.product.to_dict(),
                "domain": [self.domain.lo, self.domain.hi],
                "r": self.r,
                "value_coeffs": [p.coeffs.tolist() for p in self.value_polys],
                "continuation_coeffs": [p.coeffs.tolist() for p in self.continuation_polys],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DCSolution":
        d = json.loads(text)
        dom = ChebDomain(*d["domain"])
        return cls(
            ProductSpec(**d["product"]),
            dom,
            d["r"],
            tuple(ChebPoly(dom, c) for c in d["value_coeffs"]),
            tuple(ChebPoly(dom, c) for c in d["continuation_coeffs"]),
        )


class NumericalFailure(RuntimeError):
    pass


def backward_induction(
    products: ProductSpec | Sequence[ProductSpec],
    model: ModelSpec,
    domain: ChebDomain,
    N: int,
    gamma: MomentMatrix,
    smoothing: bool = True,
    terminal: Sequence[np.ndarray] | None = None,
    engine: TransitionEngine | None = None,
):
    """Run the dynamic Chebyshev recursion for one product or a list sharing ``gamma``.

    With ``smoothing`` the values at ``t_{n-1}`` come from a direct one-period
    valuation of the payoff: pass pre-computed discounted expectations as
    ``terminal`` or an ``engine`` able to produce them.
    Returns a :class:`DCSolution` (or a list, matching the input).
    """
    single = isinstance(products, ProductSpec)
    plist = [products] if single else list(products)
    if gamma.N != N:
        raise ValueError(f"gamma is built for N={gamma.N}, pricer asked for N={N}")
    if gamma.domain != domain:
        raise ValueError("gamma was built on a different domain")
    for p in plist:
        if not math.isclose(p.dt, gamma.dt, rel_tol=1e-12):
            raise ValueError(f"gamma step {gamma.dt} does not match product step {p.dt}")
    if smoothing and terminal is None:
        if engine is None:
            engine = TransitionEngine(model, domain, N, backend=gamma.backend,
                                      m_pre=gamma.m_pre or 100_000, seed=gamma.seed or 1)
        terminal = [engine.expected_payoff(p, p.dt) for p in plist]

    nodes = domain.nodes(N)
    G = gamma.gamma
    out = []
    for i, p in enumerate(plist):
        disc = math.exp(-model.r * p.dt)
        n = p.n_dates
        values: list[ChebPoly | None] = [None] * (n + 1)
        conts: list[ChebPoly | None] = [None] * n
        terminal_values = payoff(p, nodes)
        values[n] = ChebPoly.from_values(domain, terminal_values)
        for u in range(n - 1, -1, -1):
            if smoothing and u == n - 1:
                cont = np.asarray(terminal[i], dtype=float)
            else:
                cont = disc * (G @ values[u + 1].coeffs)
            nodal = _apply_rule(p, nodes, cont)
            if not np.all(np.isfinite(nodal)):
                bad = int(np.flatnonzero(~np.isfinite(nodal))[0])
                raise NumericalFailure(f"non-finite nodal value at date {u}, node {bad} (x={nodes[bad]:.6g})")
            conts[u] = ChebPoly.from_values(domain, cont)
            values[u] = ChebPoly.from_values(domain, nodal)
        out.append(DCSolution(p, domain, model.r, tuple(values), tuple(conts)))
    return out[0] if single else out


def solve(
    product: ProductSpec,
    model: ModelSpec,
    N: int | None = None,
    domain: ChebDomain | None = None,
    backend: str | None = None,
    smoothing: bool = True,
    m_pre: int = 100_000,
    seed: int = 1,
) -> DCSolution:
    """Build the pre-computation for ``product`` and run :func:`backward_induction`."""
    N = default_degree(product) if N is None else N
    domain = default_domain(product, model) if domain is None else domain
    engine = TransitionEngine(model, domain, N, backend, m_pre=m_pre, seed=seed)
    gamma = engine.prepare(product.dt, [product])
    return backward_induction(product, model, domain, N, gamma, smoothing, engine=engine)


# ---------------------------------------------------------------------------
# evaluation and Greeks
# ---------------------------------------------------------------------------

def value_at(product: ProductSpec, poly: ChebPoly, x, tau: float, r: float):
    """Interpolant inside the domain, extension rule outside (vectorised)."""
    x = np.asarray(x, dtype=float)
    dom = poly.domain
    inside = dom.contains(x)
    out = np.empty(x.shape)
    if np.any(inside):
        out[inside] = poly(x[inside])
    if np.any(~inside):
        out[~inside] = extension_value(product, x[~inside], tau, r, dom)
    if product.kind is ProductKind.BARRIER_UP_OUT_CALL:
        out = np.where(x > product.log_barrier, 0.0, out)
    return float(out) if out.ndim == 0 else out


def price(solution: DCSolution, t_index: int, x):
    """Option value at date ``t_index`` and log-price ``x``."""
    n = solution.product.n_dates
    if not 0 <= t_index <= n:
        raise IndexError(f"t_index must be in [0, {n}]")
    if t_index == n:
        return payoff(solution.product, x)
    tau = solution.product.maturity - solution.dates[t_index]
    return value_at(solution.product, solution.value_polys[t_index], x, tau, solution.r)


def _interior(solution: DCSolution, x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= solution.domain.lo) or np.any(x >= solution.domain.hi):
        raise ValueError("Greeks are only available strictly inside the domain")
    return x


def delta(solution: DCSolution, t_index: int, x):
    """``dV/dx`` in log-price from the differentiated interpolant."""
    x = _interior(solution, x)
    return solution.value_polys[t_index].derivative()(x)


def gamma_greek(solution: DCSolution, t_index: int, x):
    """``d^2V/dx^2`` in log-price."""
    x = _interior(solution, x)
    return solution.value_polys[t_index].derivative().derivative()(x)


def spot_greeks(solution: DCSolution, t_index: int, spot) -> tuple:
    """Delta and gamma with respect to the spot price."""
    s = np.asarray(spot, dtype=float)
    x = np.log(s)
    dx = delta(solution, t_index, x)
    gx = gamma_greek(solution, t_index, x)
    return dx / s, (gx - dx) / s**2
