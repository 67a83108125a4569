"""Asset models, risk-neutral transition descriptors and path simulation.

All simulation is in log-price ``X = log S``. Random numbers come from a
Philox (counter-based) generator and normals are produced by inverting the
standard normal CDF, so a given seed reproduces the same draws on any platform.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri

CEV_SUBSTEPS = 8


class ModelTag(str, enum.Enum):
    BLACK_SCHOLES = "black_scholes"
    MERTON = "merton"
    CEV = "cev"


class Measure(str, enum.Enum):
    P = "P"
    Q = "Q"


@dataclass(frozen=True)
class ModelSpec:
    """Parameter set of one of the three supported equity models.

    ``mu_p`` is the real-world drift, ``r`` the risk-free rate. Jump fields are
    only read for Merton, ``cev_exponent`` only for CEV (``dS = mu S dt +
    sigma S^(beta/2) dW``).

    Under P the Merton log-drift is compensated by default so that
    ``E[S_t] = S_0 exp(mu_p t)``; ``compensate_p_jumps=False`` uses the plain
    ``mu_p - sigma^2/2`` instead. The Q drift is always compensated.
    """

    tag: ModelTag
    sigma: float
    mu_p: float = 0.1
    r: float = 0.03
    jump_intensity: float = 0.0
    jump_mean: float = 0.0
    jump_std: float = 0.0
    cev_exponent: float = 2.0
    compensate_p_jumps: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "tag", ModelTag(self.tag))
        for name in ("sigma", "mu_p", "r", "jump_intensity", "jump_mean", "jump_std", "cev_exponent"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "compensate_p_jumps", bool(self.compensate_p_jumps))
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.jump_intensity < 0 or self.jump_std < 0:
            raise ValueError("jump_intensity and jump_std must be non-negative")
        if self.cev_exponent <= 0:
            raise ValueError("cev_exponent must be positive")

    @classmethod
    def black_scholes(cls, sigma: float = 0.25, mu_p: float = 0.1, r: float = 0.03) -> "ModelSpec":
        return cls(ModelTag.BLACK_SCHOLES, sigma, mu_p, r)

    @classmethod
    def merton(
        cls,
        sigma: float = 0.25,
        jump_intensity: float = 0.4,
        jump_mean: float = -0.5,
        jump_std: float = 0.4,
        mu_p: float = 0.1,
        r: float = 0.03,
        compensate_p_jumps: bool = True,
    ) -> "ModelSpec":
        return cls(ModelTag.MERTON, sigma, mu_p, r, jump_intensity, jump_mean, jump_std,
                   compensate_p_jumps=compensate_p_jumps)

    @classmethod
    def cev(cls, sigma: float = 0.3, cev_exponent: float = 1.5, mu_p: float = 0.1, r: float = 0.03) -> "ModelSpec":
        return cls(ModelTag.CEV, sigma, mu_p, r, cev_exponent=cev_exponent)

    @property
    def jump_compensator(self) -> float:
        """``lambda (E[e^J] - 1)``, zero outside Merton."""
        if self.tag is not ModelTag.MERTON:
            return 0.0
        return self.jump_intensity * np.expm1(self.jump_mean + 0.5 * self.jump_std**2)

    def growth_rate(self, measure: Measure | str) -> float:
        return self.r if Measure(measure) is Measure.Q else self.mu_p

    def log_drift(self, measure: Measure | str) -> float:
        """Drift per year of ``log S`` for the exponential-Levy models."""
        if self.tag is ModelTag.CEV:
            raise ValueError("CEV log-price has no constant drift")
        comp = self.jump_compensator
        if Measure(measure) is Measure.P and not self.compensate_p_jumps:
            comp = 0.0
        return self.growth_rate(measure) - 0.5 * self.sigma**2 - comp

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "sigma": self.sigma,
            "mu_p": self.mu_p,
            "r": self.r,
            "jump_intensity": self.jump_intensity,
            "jump_mean": self.jump_mean,
            "jump_std": self.jump_std,
            "cev_exponent": self.cev_exponent,
            "compensate_p_jumps": self.compensate_p_jumps,
        }


def merton_cf(z, t: float, spec: ModelSpec):
    """Risk-neutral characteristic function of the Merton log-return over ``t``."""
    if spec.tag is not ModelTag.MERTON:
        raise ValueError(f"merton_cf needs a merton model, got {spec.tag.value}")
    z = np.asarray(z, dtype=complex)
    b = spec.log_drift(Measure.Q)
    jumps = np.exp(1j * z * spec.jump_mean - 0.5 * spec.jump_std**2 * z**2) - 1.0
    out = np.exp(t * (1j * b * z - 0.5 * spec.sigma**2 * z**2 + spec.jump_intensity * jumps))
    return complex(out) if out.ndim == 0 else out


def q_char_fn(spec: ModelSpec, t: float):
    """Characteristic function ``u -> E^Q[exp(i u (X_t - X_0))]`` for BS and Merton."""
    if spec.tag is ModelTag.MERTON:
        return lambda u: merton_cf(u, t, spec)
    if spec.tag is ModelTag.BLACK_SCHOLES:
        b = spec.log_drift(Measure.Q)
        return lambda u: np.exp(t * (1j * b * np.asarray(u, dtype=complex) - 0.5 * spec.sigma**2 * np.asarray(u, dtype=complex) ** 2))
    raise ValueError("no closed-form characteristic function for CEV")


def conditional_normal_params(spec: ModelSpec, x: float, dt: float) -> tuple[float, float]:
    """Mean shift and variance of ``X_{t+dt} - X_t`` under Q for Black-Scholes.

    ``x`` is accepted for interface symmetry with state-dependent models; the
    Black-Scholes increment does not depend on it.
    """
    if spec.tag is not ModelTag.BLACK_SCHOLES:
        raise ValueError(f"{spec.tag.value} increments are not conditionally normal")
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return spec.log_drift(Measure.Q) * dt, spec.sigma**2 * dt


# ---------------------------------------------------------------------------
# random numbers
# ---------------------------------------------------------------------------

def make_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream)``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, int(stream)]))


def normals(gen: np.random.Generator, size) -> np.ndarray:
    """Standard normals by inverse CDF of open-interval uniforms."""
    k = gen.integers(0, 1 << 53, size=size, dtype=np.int64)
    return ndtri((k + 0.5) * 2.0**-53)


def cev_euler(
    spec: ModelSpec,
    s0,
    dt: float,
    z: np.ndarray,
    measure: Measure | str,
) -> np.ndarray:
    """Full-truncation Euler steps of the CEV price.

    ``z`` holds one standard normal per substep along its first axis; the step
    size is ``dt / len(z)``. ``s0`` broadcasts against ``z[0]``.
    """
    h = dt / z.shape[0]
    growth = spec.growth_rate(measure)
    half_beta = 0.5 * spec.cev_exponent
    sqrt_h = np.sqrt(h)
    s = np.broadcast_to(np.asarray(s0, dtype=float), np.broadcast_shapes(np.shape(s0), z.shape[1:])).copy()
    for zk in z:
        pos = np.maximum(s, 0.0)
        s = s + growth * pos * h + spec.sigma * pos**half_beta * sqrt_h * zk
    return np.maximum(s, 0.0)


# smallest price kept when converting floored CEV prices to log
_TINY_PRICE = np.finfo(float).tiny


def safe_log(s) -> np.ndarray:
    return np.log(np.maximum(s, _TINY_PRICE))


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathSet:
    """``M x (n+1)`` matrix of simulated log-prices on ``grid``."""

    values: np.ndarray = field(repr=False)
    grid: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        grid = np.asarray(self.grid, dtype=float)
        if values.ndim != 2 or values.shape[1] != grid.size:
            raise ValueError("values must be M x len(grid)")
        if grid.size < 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be non-empty and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        values.setflags(write=False)
        grid.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def save(self, path: str | Path) -> None:
        """Binary export (``.npz``), exact round trip."""
        np.savez(path, values=self.values, grid=self.grid, seed=np.int64(self.seed))

    @classmethod
    def load(cls, path: str | Path) -> "PathSet":
        with np.load(path) as data:
            return cls(data["values"], data["grid"], int(data["seed"]))

    def to_csv(self, path: str | Path) -> None:
        """Debug export: header row of grid dates, one row per path."""
        header = ",".join(repr(float(t)) for t in self.grid)
        np.savetxt(path, self.values, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path: str | Path, seed: int = 0) -> "PathSet":
        with open(path) as fh:
            grid = np.array([float(t) for t in fh.readline().strip().split(",")])
        values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(values, grid, seed)


def simulate_paths(
    spec: ModelSpec,
    measure: Measure | str,
    x0: float,
    grid,
    M: int,
    seed: int,
    cev_substeps: int = CEV_SUBSTEPS,
) -> PathSet:
    """Simulate ``M`` log-price paths on ``grid`` (which must start at 0).

    Black-Scholes and Merton increments are sampled exactly; Merton jumps are
    compound Poisson with normal sizes and the drift follows
    :meth:`ModelSpec.log_drift`. CEV uses full-truncation
    Euler on the price with ``cev_substeps`` steps per grid interval.
    """
    measure = Measure(measure)
    M = int(M)
    if M < 1:
        raise ValueError("need at least one path")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")

    gen = make_generator(seed)
    dts = np.diff(grid)
    out = np.empty((M, grid.size))
    out[:, 0] = x0

    if spec.tag is ModelTag.CEV:
        s = np.full(M, np.exp(x0))
        for u, dt in enumerate(dts, start=1):
            z = normals(gen, (cev_substeps, M))
            s = cev_euler(spec, s, dt, z, measure)
            out[:, u] = safe_log(s)
        return PathSet(out, grid, seed)

    drift = spec.log_drift(measure)
    x = np.full(M, float(x0))
    for u, dt in enumerate(dts, start=1):
        x = x + drift * dt + spec.sigma * np.sqrt(dt) * normals(gen, M)
        if spec.tag is ModelTag.MERTON and spec.jump_intensity > 0:
            counts = gen.poisson(spec.jump_intensity * dt, M)
            jz = normals(gen, M)
            x = x + counts * spec.jump_mean + np.sqrt(counts) * spec.jump_std * jz
        out[:, u] = x
    return PathSet(out, grid, seed)
