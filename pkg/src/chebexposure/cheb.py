"""Univariate Chebyshev interpolation on an interval of log-prices.

Nodes are ordered ``z_k = cos(pi k / N)`` for ``k = 0..N`` (descending), and
every coefficient vector in this package refers to that ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

# Evaluation points may land on the boundary up to transform roundoff.
UNIT_TOL = 1e-12


@dataclass(frozen=True)
class ChebDomain:
    """Closed interpolation interval ``[lo, hi]`` in log-price."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo, hi = float(self.lo), float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError(f"domain bounds must be finite, got [{lo}, {hi}]")
        if not lo < hi:
            raise ValueError(f"domain requires lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_unit(self, x):
        return 1.0 - 2.0 * (self.hi - np.asarray(x, dtype=float)) / self.width

    def from_unit(self, z):
        return self.hi + 0.5 * (self.lo - self.hi) * (1.0 - np.asarray(z, dtype=float))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= self.lo) & (x <= self.hi)

    def nodes(self, N: int) -> np.ndarray:
        """Chebyshev points mapped into the domain, same order as :func:`cheb_nodes`."""
        return self.from_unit(cheb_nodes(N))


def to_unit(domain: ChebDomain, x):
    return domain.to_unit(x)


def from_unit(domain: ChebDomain, z):
    return domain.from_unit(z)


def cheb_nodes(N: int) -> np.ndarray:
    """Return the ``N + 1`` Chebyshev extreme points ``cos(pi k / N)``."""
    N = int(N)
    if N < 1:
        raise ValueError("cheb_nodes needs N >= 1 (use N=1 for constants)")
    z = np.cos(np.pi * np.arange(N + 1) / N)
    # cos(pi/2) is 6e-17 in floating point; pin exact symmetric values
    z[N - np.arange(N + 1)[: (N + 1) // 2]] = -z[: (N + 1) // 2]
    if N % 2 == 0:
        z[N // 2] = 0.0
    return z


@lru_cache(maxsize=32)
def _transform_matrix(N: int) -> np.ndarray:
    k = np.arange(N + 1)
    cosines = np.cos(np.pi * np.outer(k, k) / N)  # [j, k] = T_j(z_k)
    w = np.ones(N + 1)
    w[0] = w[-1] = 0.5  # double-prime sum over k
    scale = np.full(N + 1, 2.0 / N)
    scale[0] = scale[-1] = 1.0 / N
    mat = scale[:, None] * cosines * w[None, :]
    mat.setflags(write=False)
    return mat


def coefficients(values) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through ``values`` at the nodes.

    ``values[k]`` is the function value at ``cheb_nodes(N)[k]``. The transform is
    the direct double-prime cosine sum, O(N^2).
    """
    f = np.asarray(values, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("coefficients needs at least two nodal values")
    return _transform_matrix(f.size - 1) @ f


def clenshaw(coeffs, z):
    """Evaluate ``sum_j coeffs[j] T_j(z)`` by Clenshaw's recurrence.

    ``z`` may be a scalar or an array; it must lie in ``[-1, 1]`` up to
    :data:`UNIT_TOL`.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coeffs must be a non-empty 1-d sequence")
    zz = np.asarray(z, dtype=float)
    if np.any(np.abs(zz) > 1.0 + UNIT_TOL) or np.any(np.isnan(zz)):
        raise ValueError("clenshaw argument outside [-1, 1]")
    zz = np.clip(zz, -1.0, 1.0)
    b1 = np.zeros_like(zz)
    b2 = np.zeros_like(zz)
    two_z = 2.0 * zz
    for ck in c[:0:-1]:
        b1, b2 = ck + two_z * b1 - b2, b1
    out = c[0] + zz * b1 - b2
    return float(out) if out.ndim == 0 else out


def chebvander(z, N: int) -> np.ndarray:
    """Basis matrix ``B[i, j] = T_j(z_i)`` built with the three-term recurrence."""
    return chebvander_t(z, N).T


def chebvander_t(z, N: int) -> np.ndarray:
    """Transposed basis ``B[j, i] = T_j(z_i)``; rows are contiguous, which is faster to fill."""
    zz = np.asarray(z, dtype=float).ravel()
    out = np.empty((N + 1, zz.size))
    out[0] = 1.0
    if N >= 1:
        out[1] = zz
    two_z = 2.0 * zz
    for j in range(2, N + 1):
        np.multiply(two_z, out[j - 1], out=out[j])
        out[j] -= out[j - 2]
    return out


def derivative_coeffs(coeffs) -> np.ndarray:
    """Coefficients of ``d/dz`` of a Chebyshev series (unit variable).

    Uses ``c'_{k-1} = c'_{k+1} + 2k c_k`` from the top down and halves the
    constant term. Multiply by ``2 / (hi - lo)`` to differentiate in ``x``.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise ValueError("derivative_coeffs needs at least two coefficients")
    N = c.size - 1
    d = np.zeros(N + 1)  # d[N] stays 0 as the c'_{N} seed
    for k in range(N, 0, -1):
        d[k - 1] = (d[k + 1] if k + 1 <= N else 0.0) + 2.0 * k * c[k]
    d[0] *= 0.5
    return d[:N]


@dataclass(frozen=True)
class ChebPoly:
    """Chebyshev series ``sum_j c_j T_j(to_unit(x))`` on ``domain``."""

    domain: ChebDomain
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("ChebPoly needs a non-empty coefficient vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("ChebPoly coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        return eval_poly(self, x)

    def derivative(self) -> "ChebPoly":
        """Derivative with respect to ``x`` (chain factor applied)."""
        if self.coeffs.size == 1:
            return ChebPoly(self.domain, np.zeros(1))
        scale = 2.0 / self.domain.width
        return ChebPoly(self.domain, scale * derivative_coeffs(self.coeffs))

    @classmethod
    def from_values(cls, domain: ChebDomain, values) -> "ChebPoly":
        return cls(domain, coefficients(values))

    @classmethod
    def interpolate(cls, f: Callable, domain: ChebDomain, N: int) -> "ChebPoly":
        return cls.from_values(domain, f(domain.nodes(N)))


def eval_poly(p: ChebPoly, x):
    """Evaluate ``p`` at log-price(s) ``x``; points outside the domain are rejected."""
    z = p.domain.to_unit(x)
    if np.any(np.abs(z) > 1.0 + UNIT_TOL):
        raise ValueError(
            f"evaluation point outside domain [{p.domain.lo}, {p.domain.hi}]"
        )
    return clenshaw(p.coeffs, z)
