"""Conditional expectations of the Chebyshev basis, ``Gamma[k, j] = E^Q[p_j(X_dt) | X_0 = x_k]``.

Three backends:

* ``analytic``    - conditionally normal increments, truncated-normal moment recursion;
* ``fourier``     - transition density recovered from a characteristic function;
* ``monte_carlo`` - sample averages of ``T_j`` over simulated one-step endpoints.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import ndtr

from .cheb import ChebDomain, chebvander, cheb_nodes
from .models import (
    CEV_SUBSTEPS,
    Measure,
    ModelSpec,
    ModelTag,
    cev_euler,
    make_generator,
    normals,
    safe_log,
)

BACKENDS = ("analytic", "fourier", "monte_carlo")

# Forward recursion in float64 is used when the estimated error amplification
# stays below this many decimal digits; otherwise mpmath with extra digits.
_FLOAT_DIGIT_BUDGET = 2.5
_GUARD_DIGITS = 25

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TruncatedNormalMoments:
    """``moments[j] = E[T_j(Y) 1{|Y|<=1}]`` and ``deriv_moments[j] = E[T_j'(Y) 1{|Y|<=1}]``."""

    mu: float
    sigma: float
    moments: np.ndarray
    deriv_moments: np.ndarray


def _recursion_growth_digits(mu: np.ndarray, sigma: float, N: int) -> np.ndarray:
    """Estimated log10 error amplification of the forward moment recursion.

    Frozen-coefficient analysis: at step ``n`` perturbations grow by the largest
    root modulus of ``w^4 - 2 mu w^3 - 4 sigma^2 n w^2 + 2 mu w - 1``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if N < 2:
        return np.zeros(mu.shape)
    n = np.arange(1, N, dtype=float)
    m, nn = np.meshgrid(mu, n, indexing="ij")
    comp = np.zeros(m.shape + (4, 4))
    # companion matrix of the monic quartic
    comp[..., 0, 0] = 2.0 * m
    comp[..., 0, 1] = 4.0 * sigma**2 * nn
    comp[..., 0, 2] = -2.0 * m
    comp[..., 0, 3] = 1.0
    comp[..., 1, 0] = comp[..., 2, 1] = comp[..., 3, 2] = 1.0
    rho = np.abs(np.linalg.eigvals(comp)).max(axis=-1)
    return np.log10(np.maximum(rho, 1.0)).sum(axis=-1)


def _normal_pdf(y, mu, sigma):
    return _INV_SQRT_2PI / sigma * np.exp(-0.5 * ((y - mu) / sigma) ** 2)


def _moments_float(mu: np.ndarray, sigma: float, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised forward recursion over a batch of means."""
    rows = mu.size
    m = np.zeros((rows, N + 1))
    d = np.zeros((rows, N + 1))
    f_hi = _normal_pdf(1.0, mu, sigma)
    f_lo = _normal_pdf(-1.0, mu, sigma)
    s2 = sigma * sigma
    m[:, 0] = ndtr((1.0 - mu) / sigma) - ndtr((-1.0 - mu) / sigma)
    if N == 0:
        return m, d
    m[:, 1] = mu * m[:, 0] - s2 * (f_hi - f_lo)
    d[:, 1] = m[:, 0]
    parity = [0.5 * m[:, 0], np.zeros(rows)]
    for n in range(1, N):
        p = n % 2
        parity[p] = parity[p] + m[:, n]
        d[:, n + 1] = 2.0 * (n + 1) * parity[p]
        sign = -1.0 if p else 1.0
        m[:, n + 1] = 2.0 * (mu * m[:, n] - s2 * (f_hi - sign * f_lo - d[:, n])) - m[:, n - 1]
    return m, d


def _moments_mp(mu: float, sigma: float, N: int, dps: int) -> tuple[np.ndarray, np.ndarray]:
    """Same recursion in ``dps``-digit arithmetic."""
    with mpmath.workdps(dps):
        mu_, s = mpmath.mpf(mu), mpmath.mpf(sigma)
        f_hi = mpmath.npdf(1, mu_, s)
        f_lo = mpmath.npdf(-1, mu_, s)
        s2 = s * s
        m = [mpmath.mpf(0)] * (N + 1)
        d = [mpmath.mpf(0)] * (N + 1)
        m[0] = mpmath.ncdf(1, mu_, s) - mpmath.ncdf(-1, mu_, s)
        if N >= 1:
            m[1] = mu_ * m[0] - s2 * (f_hi - f_lo)
            d[1] = m[0]
        parity = [m[0] / 2, mpmath.mpf(0)]
        for n in range(1, N):
            p = n % 2
            parity[p] += m[n]
            d[n + 1] = 2 * (n + 1) * parity[p]
            sign = -1 if p else 1
            m[n + 1] = 2 * (mu_ * m[n] - s2 * (f_hi - sign * f_lo - d[n])) - m[n - 1]
        return (
            np.array([float(v) for v in m]),
            np.array([float(v) for v in d]),
        )


def _moments_batch(mu, sigma: float, N: int) -> tuple[np.ndarray, np.ndarray]:
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    digits = _recursion_growth_digits(mu, sigma, N)
    m, d = _moments_float(mu, sigma, N)
    for i in np.flatnonzero(digits > _FLOAT_DIGIT_BUDGET):
        m[i], d[i] = _moments_mp(mu[i], sigma, N, _GUARD_DIGITS + int(math.ceil(digits[i])))
    return m, d


def truncated_cheb_moments(mu: float, sigma: float, N: int) -> TruncatedNormalMoments:
    """Truncated Chebyshev moments of ``Y ~ N(mu, sigma^2)`` on ``[-1, 1]``.

    Seeds ``mu_0 = F(1) - F(-1)`` and ``mu_1 = mu mu_0 - sigma^2 (f(1) - f(-1))``;
    then for ``n >= 1``::

        mu_{n+1} = 2 (mu mu_n - sigma^2 (f(1) - T_n(-1) f(-1) - mu'_n)) - mu_{n-1}
        mu'_{n+1} = 2 (n+1) sum'_{j <= n, j = n mod 2} mu_j

    where ``mu'_n = E[T_n'(Y) 1{|Y|<=1}]`` and ``sum'`` halves the ``j = 0``
    term. The forward recursion amplifies rounding errors roughly like
    ``prod_n max(1, 2 sigma sqrt(n))`` (more when ``|mu| > 1``); when that
    estimate exceeds a few digits the recursion is rerun in extended precision.
    """
    mu, sigma, N = float(mu), float(sigma), int(N)
    if not (math.isfinite(mu) and math.isfinite(sigma)):
        raise ValueError("mu and sigma must be finite")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if N < 0:
        raise ValueError("N must be non-negative")
    m, d = _moments_batch(np.array([mu]), sigma, N)
    return TruncatedNormalMoments(mu, sigma, m[0], d[0])


# ---------------------------------------------------------------------------
# moment matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentMatrix:
    gamma: np.ndarray = field(repr=False)
    domain: ChebDomain
    dt: float
    backend: str
    m_pre: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        g = np.array(self.gamma, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("gamma must be square (N+1) x (N+1)")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if not np.all(np.isfinite(g)):
            raise ValueError("gamma has non-finite entries")
        if np.max(np.abs(g)) > 1.0 + 1e-9:
            raise ValueError(f"gamma entry exceeds 1 in magnitude ({np.max(np.abs(g))!r})")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def N(self) -> int:
        return self.gamma.shape[0] - 1


def _normal_y_params(domain: ChebDomain, node_x, drift: float, var: float, dt: float):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if var <= 0:
        raise ValueError("variance must be positive")
    scale = 2.0 / domain.width
    mu_y = domain.to_unit(node_x) + scale * dt * drift
    sigma_y = scale * math.sqrt(var * dt)
    return mu_y, sigma_y


def gamma_row_normal(domain: ChebDomain, node_x: float, drift: float, var: float, dt: float, N: int) -> np.ndarray:
    """One row of Gamma for ``X_dt | X_0 = node_x ~ N(node_x + drift dt, var dt)``."""
    mu_y, sigma_y = _normal_y_params(domain, node_x, drift, var, dt)
    return truncated_cheb_moments(float(mu_y), sigma_y, N).moments


def gamma_normal(domain: ChebDomain, N: int, drift: float, var: float, dt: float) -> MomentMatrix:
    """Analytic Gamma for conditionally normal increments (drift/var per unit time)."""
    mu_y, sigma_y = _normal_y_params(domain, domain.nodes(N), drift, var, dt)
    m, _ = _moments_batch(mu_y, sigma_y, N)
    return MomentMatrix(m, domain, dt, "analytic")


# ---------------------------------------------------------------------------
# Fourier backend
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierQuadrature:
    """Settings for density recovery and integration.

    The density of the increment is expanded in a cosine series on
    ``c1 +- width_L * sqrt(c2 + sqrt(|c4|))`` (cumulants ``c_n``) and integrated
    by composite Gauss-Legendre (``panels`` panels of ``order`` points).
    ``n_cos``, the window and the panel count grow automatically for
    densities the defaults cannot resolve, up to ``max_n_cos`` terms.
    """

    width_L: float = 16.0
    n_cos: int = 1024
    panels: int = 128
    order: int = 16
    tail_tol: float = 1e-10
    max_n_cos: int = 16384


class QuadratureError(RuntimeError):
    pass


def cumulants(charfn: Callable, n_max: int = 4, radius: float = 1.0, n_points: int = 64) -> np.ndarray:
    """First ``n_max`` cumulants from a characteristic function.

    Taylor coefficients of ``log charfn`` are read off a circle of complex
    arguments (discrete Cauchy integral); the radius is halved until the
    principal logarithm is unambiguous on the circle.
    """
    k = np.arange(n_points)
    for _ in range(60):
        u = radius * np.exp(2j * np.pi * k / n_points)
        vals = np.asarray(charfn(u), dtype=complex)
        if np.all(np.isfinite(vals)) and np.all(vals != 0):
            logs = np.log(vals)
            if np.max(np.abs(logs.imag)) < 1.0:
                break
        radius *= 0.5
    else:
        raise QuadratureError("could not find a usable radius for the cumulant expansion")
    taylor = np.fft.fft(logs) / n_points
    n = np.arange(n_max + 1)
    coef = taylor[: n_max + 1] / radius**n
    kappa = coef * np.array([math.factorial(i) for i in n]) / (1j) ** n
    return kappa.real[1:]


class IncrementDensity:
    """Transition density of the log-price increment, recovered by a cosine series."""

    def __init__(self, charfn: Callable, cfg: FourierQuadrature = FourierQuadrature()):
        self.cfg = cfg
        c1, c2, _, c4 = cumulants(charfn)
        half = cfg.width_L * math.sqrt(max(c2, 0.0) + math.sqrt(abs(c4)))
        if not half > 0:
            raise QuadratureError("degenerate increment distribution (zero variance)")
        # Short steps of a jump model mix a narrow diffusive peak with wide jump
        # tails: the series gets more terms until phi has decayed, and a wider
        # window (with proportionally more terms) until the edges are negligible.
        n_cos = cfg.n_cos
        while True:
            if n_cos > cfg.max_n_cos:
                raise QuadratureError(
                    f"cosine series needs more than {cfg.max_n_cos} terms on [{c1 - half:.4g}, {c1 + half:.4g}]; "
                    f"increase max_n_cos or widen width_L"
                )
            self.a, self.b = c1 - half, c1 + half
            length = self.b - self.a
            self._freq = np.arange(n_cos) * np.pi / length
            phi = np.asarray(charfn(self._freq), dtype=complex)
            tail = np.max(np.abs(phi[-8:]))
            if tail > cfg.tail_tol:
                n_cos *= 2
                continue
            coef = 2.0 / length * (phi * np.exp(-1j * self._freq * self.a)).real
            coef[0] *= 0.5
            self._coef = coef
            edge = max(abs(self.pdf(self.a)), abs(self.pdf(self.b))) * length
            if edge > cfg.tail_tol * 1e2:
                half *= 2.0
                n_cos *= 2
                continue
            break
        self.n_cos = n_cos
        gx, gw = np.polynomial.legendre.leggauss(cfg.order)
        self._gl = (gx, gw)
        self.panels = max(cfg.panels, cfg.panels * n_cos // cfg.n_cos)
        self._breaks = np.linspace(self.a, self.b, self.panels + 1)
        h = np.diff(self._breaks)
        mid = 0.5 * (self._breaks[:-1] + self._breaks[1:])
        self._y = (mid[:, None] + 0.5 * h[:, None] * gx[None, :])  # panels x order
        self._w = 0.5 * h[:, None] * gw[None, :] * self.pdf(self._y)

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        inside = (y >= self.a) & (y <= self.b)
        vals = np.cos(np.multiply.outer(y - self.a, self._freq)) @ self._coef
        return np.where(inside, vals, 0.0)

    def _sub_panel(self, lo: float, hi: float):
        gx, gw = self._gl
        y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
        return y, 0.5 * (hi - lo) * gw * self.pdf(y)

    def quadrature(self, lo: float = -np.inf, hi: float = np.inf, cuts: Sequence[float] = ()):
        """Points and weights for ``int_lo^hi h(y) q(y) dy`` with kinks at ``cuts``.

        Panels that contain ``lo``, ``hi`` or a cut are split there and
        re-integrated with fresh density evaluations.
        """
        lo, hi = max(lo, self.a), min(hi, self.b)
        if not lo < hi:
            return np.empty(0), np.empty(0)
        brk = self._breaks
        special = sorted({lo, hi, *[c for c in cuts if lo < c < hi]})
        ys, ws = [], []
        for p in range(self.panels):
            p_lo, p_hi = brk[p], brk[p + 1]
            if p_hi <= lo or p_lo >= hi:
                continue
            inner = [s for s in special if p_lo < s < p_hi]
            if not inner:
                ys.append(self._y[p])
                ws.append(self._w[p])
                continue
            pts = [max(p_lo, lo), *[s for s in inner if lo < s < hi], min(p_hi, hi)]
            for s_lo, s_hi in zip(pts[:-1], pts[1:]):
                if s_hi > s_lo:
                    y, w = self._sub_panel(s_lo, s_hi)
                    ys.append(y)
                    ws.append(w)
        return np.concatenate(ys), np.concatenate(ws)

    def expect(self, fn: Callable, shift: float = 0.0, lo: float = -np.inf, hi: float = np.inf, cuts: Sequence[float] = ()):
        """``E[fn(shift + Y) 1{lo <= shift + Y <= hi}]`` with discontinuities at ``cuts`` (absolute)."""
        y, w = self.quadrature(lo - shift, hi - shift, [c - shift for c in cuts])
        if y.size == 0:
            return 0.0 * fn(np.array([shift]))[0]
        return w @ fn(shift + y)


def gamma_fourier(
    domain: ChebDomain,
    N: int,
    charfn: Callable,
    dt: float,
    quad_cfg: FourierQuadrature = FourierQuadrature(),
    density: IncrementDensity | None = None,
) -> MomentMatrix:
    """Gamma from the characteristic function of the increment over ``dt``."""
    dens = density if density is not None else IncrementDensity(charfn, quad_cfg)
    basis = lambda x: chebvander(domain.to_unit(x), N)
    rows = [dens.expect(basis, xk, domain.lo, domain.hi) for xk in domain.nodes(N)]
    return MomentMatrix(np.array(rows), domain, dt, "fourier")


# ---------------------------------------------------------------------------
# Monte Carlo backend
# ---------------------------------------------------------------------------

def _basis_means(z: np.ndarray, weight: np.ndarray, N: int, m: int) -> np.ndarray:
    """``sum_i weight_i T_j(z_i) / m`` for ``j = 0..N`` without storing the basis."""
    out = np.empty(N + 1)
    t_prev = weight.copy()
    out[0] = t_prev.sum()
    if N >= 1:
        t_cur = z * weight
        out[1] = t_cur.sum()
        two_z = 2.0 * z
        for j in range(2, N + 1):
            t_prev, t_cur = t_cur, two_z * t_cur - t_prev
            out[j] = t_cur.sum()
    return out / m


def matched_normals(gen, shape) -> np.ndarray:
    """Antithetic normals rescaled to unit sample variance along the last axis.

    The same draws are reused at every node and every backward step, so any
    sample-mean error in the increments would accumulate linearly over the
    dates; pairing ``z`` with ``-z`` removes it and the rescaling fixes the
    second moment.
    """
    *lead, m = shape
    half = normals(gen, (*lead, (m + 1) // 2))
    z = np.concatenate([half, -half], axis=-1)[..., :m]
    z -= z.mean(axis=-1, keepdims=True)  # only non-zero for odd m
    return z / np.sqrt(np.mean(z**2, axis=-1, keepdims=True))


def q_endpoints(model: ModelSpec, x_nodes: np.ndarray, dt: float, m_pre: int, seed: int):
    """Yield ``(k, X_dt samples)`` for each starting node, common random numbers across nodes."""
    gen = make_generator(seed, stream=1)
    if model.tag is ModelTag.CEV:
        z = matched_normals(gen, (CEV_SUBSTEPS, m_pre))
        for k, xk in enumerate(x_nodes):
            yield k, safe_log(cev_euler(model, math.exp(xk), dt, z, Measure.Q))
        return
    if model.tag not in (ModelTag.BLACK_SCHOLES, ModelTag.MERTON):
        raise ValueError(f"no Q simulation for {model.tag}")
    inc = model.log_drift(Measure.Q) * dt + model.sigma * math.sqrt(dt) * matched_normals(gen, (m_pre,))
    if model.tag is ModelTag.MERTON and model.jump_intensity > 0:
        counts = gen.poisson(model.jump_intensity * dt, m_pre)
        inc += counts * model.jump_mean + np.sqrt(counts) * model.jump_std * normals(gen, m_pre)
    for k, xk in enumerate(x_nodes):
        yield k, xk + inc


def mc_pass(
    domain: ChebDomain,
    N: int,
    model: ModelSpec,
    dt: float,
    m_pre: int,
    seed: int,
    funcs: Sequence[Callable] = (),
) -> tuple[MomentMatrix, list[np.ndarray]]:
    """Monte Carlo Gamma plus nodal sample means of each ``funcs[i](X_dt)``.

    Sharing one pass lets the smoothing step reuse the pre-computation draws.
    """
    m_pre = int(m_pre)
    if m_pre < 1000:
        raise ValueError("m_pre must be at least 1000")
    if dt <= 0:
        raise ValueError("dt must be positive")
    nodes = domain.nodes(N)
    gamma = np.empty((N + 1, N + 1))
    extras = [np.empty(N + 1) for _ in funcs]
    for k, x in q_endpoints(model, nodes, dt, m_pre, seed):
        inside = domain.contains(x)
        z = np.clip(domain.to_unit(np.where(inside, x, domain.hi)), -1.0, 1.0)
        gamma[k] = _basis_means(z, inside.astype(float), N, m_pre)
        for f, arr in zip(funcs, extras):
            arr[k] = np.mean(f(x))
    return MomentMatrix(gamma, domain, dt, "monte_carlo", m_pre=m_pre, seed=int(seed)), extras


def gamma_mc(domain: ChebDomain, N: int, model: ModelSpec, dt: float, m_pre: int, seed: int) -> MomentMatrix:
    """Monte Carlo Gamma, deterministic given ``seed``."""
    return mc_pass(domain, N, model, dt, m_pre, seed)[0]


# ---------------------------------------------------------------------------
# cache
# ---------------------------------------------------------------------------

def cache_key(model: ModelSpec, domain: ChebDomain, N: int, dt: float, backend: str,
              m_pre: int | None = None, seed: int | None = None) -> str:
    payload = {
        "model": model.to_dict(),
        "domain": [repr(domain.lo), repr(domain.hi)],
        "N": int(N),
        "dt": repr(float(dt)),
        "backend": backend,
        "m_pre": m_pre,
        "seed": seed,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:32]


def save_moment_matrix(mm: MomentMatrix, path: str | Path) -> None:
    np.savez(
        path,
        gamma=mm.gamma,
        domain=np.array([mm.domain.lo, mm.domain.hi]),
        dt=np.float64(mm.dt),
        backend=np.array(mm.backend),
        m_pre=np.int64(-1 if mm.m_pre is None else mm.m_pre),
        seed=np.int64(-1 if mm.seed is None else mm.seed),
    )


def load_moment_matrix(path: str | Path) -> MomentMatrix:
    with np.load(path) as d:
        m_pre, seed = int(d["m_pre"]), int(d["seed"])
        return MomentMatrix(
            d["gamma"],
            ChebDomain(*d["domain"]),
            float(d["dt"]),
            str(d["backend"]),
            None if m_pre < 0 else m_pre,
            None if seed < 0 else seed,
        )


class MomentCache:
    """Directory of ``.npz`` moment matrices keyed by :func:`cache_key`."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path_for(self, key: str) -> Path:
        return self.directory / f"gamma_{key}.npz"

    def get_or_compute(self, key: str, compute: Callable[[], MomentMatrix]) -> MomentMatrix:
        path = self.path_for(key)
        if path.exists():
            return load_moment_matrix(path)
        mm = compute()
        save_moment_matrix(mm, path)
        return mm
