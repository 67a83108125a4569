"""Independent reference values for the test suite.

Nothing here imports the interpolation, moment or pricing modules of the
package; only the model parameter container and the path simulator are
shared, so every check compares two separate routes to the same number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import gammaln, ndtr
from scipy.stats import ncx2

from chebexposure.models import Measure, ModelSpec, ModelTag, simulate_paths


@dataclass(frozen=True)
class OracleResult:
    value: float
    std_error: float = 0.0
    method_tag: str = ""

    def __post_init__(self) -> None:
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")


def _bs_price(kind, S, K, r, sigma, tau):
    S = np.asarray(S, dtype=float)
    sd = sigma * np.sqrt(tau)
    d1 = (np.log(S / K) + (r + 0.5 * sigma**2) * tau) / sd
    d2 = d1 - sd
    if kind == "call":
        return S * ndtr(d1) - K * np.exp(-r * tau) * ndtr(d2)
    if kind == "put":
        return K * np.exp(-r * tau) * ndtr(-d2) - S * ndtr(-d1)
    raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")


def bs_european(kind: str, S: float, K: float, r: float, sigma: float, tau: float) -> OracleResult:
    """Black-Scholes closed form."""
    if min(S, K, sigma, tau) <= 0:
        raise ValueError("S, K, sigma and tau must be positive")
    return OracleResult(float(_bs_price(kind, S, K, r, sigma, tau)), 0.0, "bs_closed_form")


def merton_european_series(kind: str, S: float, K: float, r: float, spec: ModelSpec, tau: float,
                           n_terms: int | None = None) -> OracleResult:
    """Poisson mixture of Black-Scholes prices, conditioning on the number of jumps.

    Summed until the Poisson weight of the next term drops below 1e-16 (or for
    exactly ``n_terms`` terms when given).
    """
    if n_terms is not None and n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    lam, a, b, sig = spec.jump_intensity, spec.jump_mean, spec.jump_std, spec.sigma
    k = math.exp(a + 0.5 * b * b) - 1.0
    lam_t = lam * (1.0 + k) * tau
    total, n = 0.0, 0
    while True:
        logw = -lam_t + (n * math.log(lam_t) if lam_t > 0 else 0.0) - gammaln(n + 1)
        w = math.exp(logw) if lam_t > 0 else float(n == 0)
        r_n = r - lam * k + n * math.log1p(k) / tau
        sig_n = math.sqrt(sig * sig + n * b * b / tau)
        total += w * float(_bs_price(kind, S, K, r_n, sig_n, tau))
        n += 1
        if n_terms is not None:
            if n >= n_terms:
                break
        elif n > lam_t and w < 1e-16:
            break
    return OracleResult(total, 0.0, f"merton_series_{n}")


def cev_european(kind: str, S: float, K: float, r: float, sigma: float, beta: float, tau: float) -> OracleResult:
    """CEV price for ``dS = r S dt + sigma S^(beta/2) dW`` with ``beta < 2`` (noncentral chi-square form)."""
    if not 0 < beta < 2:
        raise ValueError("closed form implemented for 0 < beta < 2")
    if r == 0:
        raise ValueError("closed form below assumes r != 0")
    b = 2.0 - beta
    k = 2.0 * r / (sigma**2 * b * (math.exp(r * b * tau) - 1.0))
    x = k * S**b * math.exp(r * b * tau)
    y = k * K**b
    call = S * ncx2.sf(2 * y, 2 + 2 / b, 2 * x) - K * math.exp(-r * tau) * (1 - ncx2.sf(2 * x, 2 / b, 2 * y))
    if kind == "call":
        return OracleResult(float(call), 0.0, "cev_ncx2")
    if kind == "put":
        return OracleResult(float(call - S + K * math.exp(-r * tau)), 0.0, "cev_ncx2")
    raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")


def _crr_lattice(S, K, r, sigma, T, n_dates, tree_steps, store_dates=False):
    if tree_steps % n_dates:
        raise ValueError("tree_steps must be a multiple of the number of exercise dates")
    h = T / tree_steps
    up = math.exp(sigma * math.sqrt(h))
    p = (math.exp(r * h) - 1.0 / up) / (up - 1.0 / up)
    disc = math.exp(-r * h)
    every = tree_steps // n_dates
    logu = math.log(up)

    def logs(i):
        return math.log(S) + (2.0 * np.arange(i + 1) - i) * logu

    v = np.maximum(K - np.exp(logs(tree_steps)), 0.0)
    stored = {n_dates: (logs(tree_steps), v.copy(), v.copy())}
    for i in range(tree_steps - 1, -1, -1):
        v = disc * (p * v[1:] + (1.0 - p) * v[:-1])
        if i % every == 0 and i > 0:
            cont = v
            v = np.maximum(cont, K - np.exp(logs(i)))
            if store_dates:
                stored[i // every] = (logs(i), v.copy(), cont.copy())
        elif i == 0 and store_dates:
            stored[0] = (logs(0), v.copy(), v.copy())
    return float(v[0]), stored


def crr_bermudan(S: float, K: float, r: float, sigma: float, T: float, exercise_dates: int,
                 tree_steps: int) -> OracleResult:
    """CRR binomial put with exercise allowed at ``exercise_dates`` equally spaced dates in ``(0, T]``."""
    value, _ = _crr_lattice(S, K, r, sigma, T, int(exercise_dates), int(tree_steps))
    return OracleResult(value, 0.0, f"crr_{tree_steps}")


def moments_quadrature(mu: float, sigma: float, N: int) -> np.ndarray:
    """``int_{-1}^{1} T_j(y) phi_{mu,sigma}(y) dy`` for ``j = 0..N`` by adaptive quadrature.

    Integrates in ``theta`` with ``y = cos(theta)`` so that ``T_j`` becomes
    ``cos(j theta)``; the interval is split around the density peak.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    j = np.arange(N + 1)
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def integrand(theta):
        y = math.cos(theta)
        return np.cos(j * theta) * norm * math.exp(-0.5 * ((y - mu) / sigma) ** 2) * math.sin(theta)

    ys = np.clip(mu + sigma * np.arange(-10, 11), -1.0, 1.0)
    thetas = np.unique(np.concatenate([[0.0, math.pi], np.arccos(ys), np.linspace(0, math.pi, 9)]))
    total = np.zeros(N + 1)
    for lo, hi in zip(thetas[:-1], thetas[1:]):
        if hi - lo < 1e-15:
            continue
        val, _ = quad_vec(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=2000)
        total += val
    return total


# ---------------------------------------------------------------------------
# nested Monte Carlo exposure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NestedExposure:
    grid: np.ndarray
    ee: np.ndarray
    se: np.ndarray
    price: float


def nested_mc_exposure(kind: str, model: ModelSpec, K: float = 100.0, T: float = 1.0, n_dates: int = 52,
                       s0: float = 100.0, M: int = 200, seed: int = 7,
                       tree_steps: int = 10_400) -> NestedExposure:
    """Reference EE profile: every path/date is revalued by a separate pricer.

    European puts use the closed form (Black-Scholes) or the jump series
    (Merton). Bermudan puts use a CRR tree rooted at ``s0`` whose lattice
    values and continuation values are interpolated at the path points; the
    path exercises when the payoff reaches the tree continuation value.
    """
    if M > 500:
        raise ValueError("nested oracle is meant for at most 500 outer paths")
    if model.tag is ModelTag.CEV:
        raise ValueError("no inner pricer for CEV")
    grid = T * np.arange(n_dates + 1) / n_dates
    paths = simulate_paths(model, Measure.P, math.log(s0), grid, M, seed).values
    e = np.zeros((M, n_dates + 1))
    if kind == "european_put":
        for u in range(n_dates):
            tau = T - grid[u]
            s = np.exp(paths[:, u])
            if model.tag is ModelTag.BLACK_SCHOLES:
                e[:, u] = _bs_price("put", s, K, model.r, model.sigma, tau)
            else:
                e[:, u] = [merton_european_series("put", si, K, model.r, model, tau).value for si in s]
        e[:, n_dates] = np.maximum(K - np.exp(paths[:, n_dates]), 0.0)
    elif kind == "bermudan_put":
        if model.tag is not ModelTag.BLACK_SCHOLES:
            raise ValueError("Bermudan inner pricing is only available for Black-Scholes")
        _, lattice = _crr_lattice(s0, K, model.r, model.sigma, T, n_dates, tree_steps, store_dates=True)
        alive = np.ones(M, bool)
        for u in range(n_dates + 1):
            xs, value, cont = lattice[u]
            x = paths[:, u]
            g = np.maximum(K - np.exp(x), 0.0)
            v = np.interp(x, xs, value)
            if u == 0:
                e[:, 0] = v
                continue
            c = np.interp(x, xs, cont)
            ex = (g >= c) & (g > 0) if u < n_dates else g > 0
            e[:, u] = np.where(alive, np.where(ex, g, np.maximum(v, 0.0)), 0.0)
            alive &= ~ex
    else:
        raise ValueError(f"unsupported product {kind!r}")
    ee = e.mean(axis=0)
    se = e.std(axis=0, ddof=1) / math.sqrt(M)
    return NestedExposure(grid, ee, se, float(e[0, 0]))
