"""Checks of the reference implementations themselves."""

import math

import numpy as np
import pytest

from chebexposure.models import ModelSpec, ModelTag
from oracles import (
    OracleResult,
    bs_european,
    cev_european,
    crr_bermudan,
    merton_european_series,
    moments_quadrature,
    nested_mc_exposure,
)

BS = ModelSpec.black_scholes()


@pytest.mark.parametrize("S", [60.0, 100.0, 140.0])
def test_bs_put_call_parity(S):
    r, tau = 0.03, 0.7
    c = bs_european("call", S, 100, r, 0.25, tau).value
    p = bs_european("put", S, 100, r, 0.25, tau).value
    assert c - p == pytest.approx(S - 100 * math.exp(-r * tau), abs=1e-12)


def test_bs_short_maturity_tends_to_payoff():
    assert bs_european("put", 80, 100, 0.03, 0.25, 1e-10).value == pytest.approx(20.0, abs=1e-8)
    assert bs_european("call", 80, 100, 0.03, 0.25, 1e-10).value == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        bs_european("put", 80, 100, 0.03, 0.25, 0.0)
    with pytest.raises(ValueError):
        bs_european("straddle", 80, 100, 0.03, 0.25, 1.0)


def test_oracle_result_rejects_negative_se():
    with pytest.raises(ValueError):
        OracleResult(1.0, -0.1)


def test_merton_without_jumps_is_black_scholes():
    spec = ModelSpec(ModelTag.MERTON, 0.25, jump_mean=-0.5, jump_std=0.4, jump_intensity=0.0)
    ref = bs_european("put", 100, 100, 0.03, 0.25, 1.0).value
    assert merton_european_series("put", 100, 100, 0.03, spec, 1.0).value == pytest.approx(ref, abs=1e-13)


def test_merton_series_converges():
    spec = ModelSpec.merton()
    full = merton_european_series("put", 100, 100, 0.03, spec, 1.0).value
    short = merton_european_series("put", 100, 100, 0.03, spec, 1.0, n_terms=3).value
    assert abs(merton_european_series("put", 100, 100, 0.03, spec, 1.0, n_terms=25).value - full) < 1e-14
    assert abs(short - full) > 1e-4
    # put-call parity holds for the jump model too
    call = merton_european_series("call", 100, 100, 0.03, spec, 1.0).value
    assert call - full == pytest.approx(100 - 100 * math.exp(-0.03), abs=1e-10)


def test_cev_closed_form_near_black_scholes_limit():
    # beta close to 2 with sigma rescaled recovers the lognormal price
    beta = 1.999
    sigma = 0.25 * 100 ** (1 - beta / 2)
    ref = bs_european("put", 100, 100, 0.03, 0.25, 1.0).value
    assert cev_european("put", 100, 100, 0.03, sigma, beta, 1.0).value == pytest.approx(ref, abs=5e-3)
    with pytest.raises(ValueError):
        cev_european("put", 100, 100, 0.03, 0.3, 2.0, 1.0)


def test_crr_european_limit_and_monotone_in_dates():
    one = crr_bermudan(100, 100, 0.03, 0.25, 1.0, 1, 4000).value
    ref = bs_european("put", 100, 100, 0.03, 0.25, 1.0).value
    assert one == pytest.approx(ref, abs=0.01)
    values = [crr_bermudan(100, 100, 0.03, 0.25, 1.0, n, 2520).value for n in (1, 4, 12, 36)]
    assert np.all(np.diff(values) > 0)
    with pytest.raises(ValueError):
        crr_bermudan(100, 100, 0.03, 0.25, 1.0, 52, 1000)


def test_moments_quadrature_basics():
    m = moments_quadrature(0.0, 1.0, 6)
    assert m[0] == pytest.approx(math.erf(1 / math.sqrt(2)), abs=1e-12)
    assert np.max(np.abs(m[1::2])) < 1e-13
    with pytest.raises(ValueError):
        moments_quadrature(0.0, 0.0, 3)


def test_nested_oracle_initial_value_is_price():
    eur = nested_mc_exposure("european_put", BS, M=50, seed=2)
    assert eur.price == pytest.approx(bs_european("put", 100, 100, 0.03, 0.25, 1.0).value, abs=1e-12)
    assert eur.se[0] == pytest.approx(0.0, abs=1e-12)
    berm = nested_mc_exposure("bermudan_put", BS, M=50, seed=2, tree_steps=2600)
    assert berm.price == pytest.approx(crr_bermudan(100, 100, 0.03, 0.25, 1.0, 52, 2600).value, abs=1e-12)
    assert np.all(berm.ee >= 0)


def test_nested_oracle_guards():
    with pytest.raises(ValueError):
        nested_mc_exposure("european_put", BS, M=501)
    with pytest.raises(ValueError):
        nested_mc_exposure("european_put", ModelSpec.cev(), M=10)
    with pytest.raises(ValueError):
        nested_mc_exposure("bermudan_put", ModelSpec.merton(), M=10)
    with pytest.raises(ValueError):
        nested_mc_exposure("asian", BS, M=10)
