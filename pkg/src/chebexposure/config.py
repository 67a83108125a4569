"""Run configuration: JSON documents, built-in presets and validation.

A configuration is a JSON object with the blocks ``product``, ``model``,
``numerics``, ``simulation``, ``exposure`` and ``output``. Layers are merged
block by block with precedence flags > file > preset > defaults.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .cheb import ChebDomain
from .exposure import ExposureConfig
from .models import ModelSpec, ModelTag
from .moments import BACKENDS
from .pricer import ProductKind, ProductSpec


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


DEFAULTS: dict = {
    "numerics": {"N": None, "domain": None, "backend": None, "m_pre": 100_000, "smoothing": True},
    "simulation": {"M": 50_000, "seed": 1, "s0": 100.0, "measure": "P"},
    "exposure": {"alpha": 0.975, "grid": "exercise"},
    "output": {"dir": "output", "formats": ["csv", "json"]},
}

_MODEL_DEFAULTS = {
    "black_scholes": {"sigma": 0.25, "mu_p": 0.1, "r": 0.03},
    "merton": {"sigma": 0.25, "mu_p": 0.1, "r": 0.03, "jump_intensity": 0.4, "jump_mean": -0.5, "jump_std": 0.4,
               "compensate_p_jumps": True},
    "cev": {"sigma": 0.3, "mu_p": 0.1, "r": 0.03, "cev_exponent": 1.5},
}
_MODEL_FIELDS = {"tag", "sigma", "mu_p", "r", "jump_intensity", "jump_mean", "jump_std", "cev_exponent",
                 "compensate_p_jumps"}
_PRODUCT_FIELDS = {"kind", "K", "B", "T", "n_dates"}
_BLOCK_FIELDS = {
    "product": _PRODUCT_FIELDS,
    "model": _MODEL_FIELDS,
    "numerics": set(DEFAULTS["numerics"]),
    "simulation": set(DEFAULTS["simulation"]),
    "exposure": set(DEFAULTS["exposure"]),
    "output": set(DEFAULTS["output"]),
}


def _preset(tag: str, kind: str, **product) -> dict:
    block = {"kind": kind, "K": 100.0, "T": 1.0, "n_dates": 52}
    block.update(product)
    return {"product": block, "model": {"tag": tag}}


def _build_presets() -> dict[str, dict]:
    presets = {}
    barrier_level = {"bs": 150.0, "merton": 150.0, "cev": 125.0}
    for short, tag in (("bs", "black_scholes"), ("merton", "merton"), ("cev", "cev")):
        presets[f"{short}_european_paper"] = _preset(tag, "european_put")
        presets[f"{short}_bermudan_paper"] = _preset(tag, "bermudan_put")
        presets[f"{short}_european_call_paper"] = _preset(tag, "european_call")
        presets[f"{short}_barrier_paper"] = _preset(tag, "barrier_up_out_call", B=barrier_level[short])
    for nt in (4, 12, 36, 84, 252):
        presets[f"bs_bermudan_nt{nt}_paper"] = _preset("black_scholes", "bermudan_put", n_dates=nt)
    return presets


PRESETS: dict[str, dict] = _build_presets()


def merge(base: dict, override: dict) -> dict:
    """Block-wise merge; keys of ``override`` win, ``None`` blocks are ignored."""
    out = copy.deepcopy(base)
    for block, values in override.items():
        if values is None:
            continue
        if block not in _BLOCK_FIELDS:
            raise ConfigError(f"{block}: unknown block (expected one of {sorted(_BLOCK_FIELDS)})")
        if not isinstance(values, dict):
            raise ConfigError(f"{block}: must be an object")
        target = out.setdefault(block, {})
        for key, value in values.items():
            if key not in _BLOCK_FIELDS[block]:
                raise ConfigError(f"{block}.{key}: unknown field")
            target[key] = value
    return out


def load_layers(preset: str | None = None, file: str | Path | None = None, flags: dict | None = None) -> dict:
    doc = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}")
        doc = merge(doc, PRESETS[preset])
    if file is not None:
        try:
            text = Path(file).read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {file}: {exc.strerror}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {file} is not valid JSON ({exc.msg}, line {exc.lineno})") from exc
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
        doc = merge(doc, data)
    if flags:
        doc = merge(doc, flags)
    return doc


def _number(block: dict, name: str, where: str, *, positive=False, integer=False, required=True, default=None):
    value = block.get(name, default)
    if value is None:
        if required:
            raise ConfigError(f"{where}.{name}: required")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{name}: must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}.{name}: must be finite")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{where}.{name}: must be an integer")
        value = int(value)
    if positive and value <= 0:
        raise ConfigError(f"{where}.{name}: must be positive")
    return value


@dataclass(frozen=True)
class RunConfig:
    product: ProductSpec
    model: ModelSpec
    exposure: ExposureConfig
    output_dir: Path
    formats: tuple[str, ...]

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        product = cls._product(doc.get("product") or {})
        model = cls._model(doc.get("model") or {})
        exposure = cls._exposure(doc, model)
        out = doc.get("output") or {}
        formats = out.get("formats", ["csv", "json"])
        if isinstance(formats, str):
            formats = ["csv", "json"] if formats == "both" else [formats]
        if not formats or any(f not in ("csv", "json") for f in formats):
            raise ConfigError(f"output.formats: must be csv, json or both, got {formats!r}")
        return cls(product, model, exposure, Path(out.get("dir", "output")), tuple(formats))

    @staticmethod
    def _product(block: dict) -> ProductSpec:
        kind = block.get("kind")
        if kind is None:
            raise ConfigError("product.kind: required")
        try:
            kind = ProductKind(kind)
        except ValueError:
            raise ConfigError(f"product.kind: unknown kind {kind!r} "
                              f"(expected one of {[k.value for k in ProductKind]})") from None
        K = _number(block, "K", "product", positive=True)
        T = _number(block, "T", "product", positive=True)
        n = _number(block, "n_dates", "product", positive=True, integer=True)
        B = _number(block, "B", "product", positive=True, required=kind is ProductKind.BARRIER_UP_OUT_CALL)
        if kind is ProductKind.BARRIER_UP_OUT_CALL and B <= K:
            raise ConfigError("product.B: barrier must exceed the strike")
        if kind is not ProductKind.BARRIER_UP_OUT_CALL and B is not None:
            raise ConfigError(f"product.B: not allowed for {kind.value}")
        return ProductSpec(kind, K, T, n, B)

    @staticmethod
    def _model(block: dict) -> ModelSpec:
        tag = block.get("tag")
        if tag is None:
            raise ConfigError("model.tag: required")
        if tag not in _MODEL_DEFAULTS:
            raise ConfigError(f"model.tag: unknown model {tag!r} (expected one of {sorted(_MODEL_DEFAULTS)})")
        params = dict(_MODEL_DEFAULTS[tag])
        for key, value in block.items():
            if key == "tag":
                continue
            if key not in params:
                raise ConfigError(f"model.{key}: not a parameter of {tag}")
            params[key] = value
        for key, value in params.items():
            if key == "compensate_p_jumps":
                if not isinstance(value, bool):
                    raise ConfigError("model.compensate_p_jumps: must be true or false")
                continue
            _number(params, key, "model", positive=key in ("sigma", "cev_exponent"))
        if params.get("jump_intensity", 0) < 0 or params.get("jump_std", 0) < 0:
            bad = "jump_intensity" if params.get("jump_intensity", 0) < 0 else "jump_std"
            raise ConfigError(f"model.{bad}: must be non-negative")
        return ModelSpec(ModelTag(tag), **params)

    @staticmethod
    def _exposure(doc: dict, model: ModelSpec) -> ExposureConfig:
        num = doc.get("numerics") or {}
        sim = doc.get("simulation") or {}
        exp = doc.get("exposure") or {}
        backend = num.get("backend")
        if backend is not None:
            if backend not in BACKENDS:
                raise ConfigError(f"numerics.backend: unknown backend {backend!r} (expected one of {list(BACKENDS)})")
            if backend == "analytic" and model.tag is not ModelTag.BLACK_SCHOLES:
                raise ConfigError(f"numerics.backend: analytic moments need Black-Scholes, not {model.tag.value}")
            if backend == "fourier" and model.tag is ModelTag.CEV:
                raise ConfigError("numerics.backend: CEV has no characteristic function, use monte_carlo")
        domain = num.get("domain")
        if domain is not None:
            if not (isinstance(domain, (list, tuple)) and len(domain) == 2):
                raise ConfigError("numerics.domain: must be [lo, hi] in log-price")
            try:
                domain = ChebDomain(*domain)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"numerics.domain: {exc}") from None
        N = _number(num, "N", "numerics", integer=True, required=False)
        if N is not None and N < 2:
            raise ConfigError("numerics.N: must be at least 2")
        m_pre = _number(num, "m_pre", "numerics", positive=True, integer=True)
        if backend == "monte_carlo" or (backend is None and model.tag is ModelTag.CEV):
            if m_pre < 1000:
                raise ConfigError("numerics.m_pre: must be at least 1000")
        smoothing = num.get("smoothing", True)
        if not isinstance(smoothing, bool):
            raise ConfigError("numerics.smoothing: must be true or false")
        if sim.get("measure", "P") != "P":
            raise ConfigError("simulation.measure: exposure paths are simulated under P")
        M = _number(sim, "M", "simulation", positive=True, integer=True)
        seed = _number(sim, "seed", "simulation", integer=True)
        if seed < 0 or seed >= 2**64:
            raise ConfigError("simulation.seed: must be an unsigned 64-bit integer")
        s0 = _number(sim, "s0", "simulation", positive=True)
        alpha = _number(exp, "alpha", "exposure")
        if not 0 < alpha <= 1:
            raise ConfigError("exposure.alpha: must lie in (0, 1]")
        grid = exp.get("grid", "exercise")
        if grid not in ("exercise", "daily"):
            raise ConfigError(f"exposure.grid: must be exercise or daily, got {grid!r}")
        return ExposureConfig(N, domain, backend, m_pre, M, seed, alpha, grid, s0, smoothing)


def resolve(preset: str | None = None, file: str | Path | None = None, flags: dict | None = None) -> RunConfig:
    """Merge the layers and validate them into a :class:`RunConfig`."""
    return RunConfig.from_dict(load_layers(preset, file, flags))
