import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from chebexposure.models import (
    Measure,
    ModelSpec,
    ModelTag,
    PathSet,
    conditional_normal_params,
    make_generator,
    merton_cf,
    normals,
    q_char_fn,
    simulate_paths,
)

GRID = np.linspace(0.0, 1.0, 53)


def test_default_parameters():
    bs, mer, cev = ModelSpec.black_scholes(), ModelSpec.merton(), ModelSpec.cev()
    assert (bs.sigma, bs.mu_p, bs.r) == (0.25, 0.1, 0.03)
    assert (mer.sigma, mer.jump_mean, mer.jump_std, mer.jump_intensity) == (0.25, -0.5, 0.4, 0.4)
    assert (cev.sigma, cev.cev_exponent, cev.mu_p) == (0.3, 1.5, 0.1)


@pytest.mark.parametrize(
    "kwargs",
    [dict(sigma=0.0), dict(sigma=-1.0), dict(sigma=0.2, jump_intensity=-1.0), dict(sigma=0.2, jump_std=-0.1),
     dict(sigma=0.2, cev_exponent=0.0), dict(sigma=np.inf)],
)
def test_model_validation(kwargs):
    with pytest.raises(ValueError):
        ModelSpec(ModelTag.MERTON, **kwargs)


def test_log_drift_conventions():
    bs = ModelSpec.black_scholes()
    assert bs.log_drift("Q") == pytest.approx(0.03 - 0.5 * 0.25**2)
    assert bs.log_drift("P") == pytest.approx(0.1 - 0.5 * 0.25**2)
    mer = ModelSpec.merton()
    comp = 0.4 * (math.exp(-0.5 + 0.08) - 1)
    assert mer.log_drift("Q") == pytest.approx(0.03 - 0.03125 - comp)
    assert mer.log_drift("P") == pytest.approx(0.1 - 0.03125 - comp)
    plain = ModelSpec.merton(compensate_p_jumps=False)
    assert plain.log_drift("P") == pytest.approx(0.1 - 0.03125)
    assert plain.log_drift("Q") == mer.log_drift("Q")
    with pytest.raises(ValueError):
        ModelSpec.cev().log_drift("Q")


def test_merton_cf_is_martingale():
    spec = ModelSpec.merton()
    assert merton_cf(0.0, 1.0, spec) == pytest.approx(1.0)
    # E^Q[exp(X_t)] = exp(r t)
    assert merton_cf(-1j, 0.7, spec).real == pytest.approx(math.exp(0.03 * 0.7), rel=1e-12)
    with pytest.raises(ValueError):
        merton_cf(1.0, 1.0, ModelSpec.black_scholes())


def test_bs_char_fn_and_normal_params():
    spec = ModelSpec.black_scholes()
    assert q_char_fn(spec, 1.0)(-1j).real == pytest.approx(math.exp(0.03))
    mean, var = conditional_normal_params(spec, 4.6, 0.5)
    assert mean == pytest.approx(spec.log_drift("Q") * 0.5) and var == pytest.approx(0.25**2 * 0.5)
    with pytest.raises(ValueError):
        conditional_normal_params(ModelSpec.merton(), 0.0, 0.1)
    with pytest.raises(ValueError):
        q_char_fn(ModelSpec.cev(), 1.0)


def test_generator_reproducible():
    a = normals(make_generator(5), 10)
    b = normals(make_generator(5), 10)
    c = normals(make_generator(5, stream=1), 10)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(ValueError):
        make_generator(-1)


@pytest.mark.parametrize("spec", [ModelSpec.black_scholes(), ModelSpec.merton(), ModelSpec.cev()])
def test_simulation_deterministic_and_finite(spec):
    a = simulate_paths(spec, "P", math.log(100), GRID, 500, 3)
    b = simulate_paths(spec, "P", math.log(100), GRID, 500, 3)
    assert np.array_equal(a.values, b.values)
    assert np.all(np.isfinite(a.values)) and np.all(a.values[:, 0] == math.log(100))


def test_bs_log_return_moments():
    spec = ModelSpec.black_scholes()
    x = simulate_paths(spec, "P", 0.0, [0.0, 1.0], 200_000, 1).values[:, 1]
    se = spec.sigma / math.sqrt(x.size)
    assert abs(x.mean() - spec.log_drift("P")) < 4 * se
    assert x.std() == pytest.approx(spec.sigma, rel=0.01)


def test_merton_q_martingale():
    spec = ModelSpec.merton()
    s = np.exp(simulate_paths(spec, Measure.Q, math.log(100), [0.0, 1.0], 200_000, 2).values[:, 1])
    disc = math.exp(-spec.r) * s
    assert abs(disc.mean() - 100) < 4 * disc.std() / math.sqrt(s.size)


def test_cev_beta2_matches_black_scholes():
    cev = ModelSpec(ModelTag.CEV, 0.25, cev_exponent=2.0)
    bs = ModelSpec.black_scholes()
    x_cev = simulate_paths(cev, "P", 0.0, [0.0, 1.0], 100_000, 4, cev_substeps=64).values[:, 1]
    x_bs = simulate_paths(bs, "P", 0.0, [0.0, 1.0], 100_000, 5).values[:, 1]
    assert ks_2samp(x_cev, x_bs).pvalue > 0.01


def test_cev_price_floor():
    # huge volatility drives many paths to the floor; they stay finite
    spec = ModelSpec(ModelTag.CEV, 20.0, cev_exponent=1.0)
    x = simulate_paths(spec, "Q", math.log(1.0), GRID, 2000, 1).values
    assert np.all(np.isfinite(x))
    assert np.any(x[:, -1] < -700)


@pytest.mark.parametrize("grid", [[0.1, 0.5], [0.0, 0.5, 0.5], [[0.0, 1.0]]])
def test_simulation_grid_validation(grid):
    with pytest.raises(ValueError):
        simulate_paths(ModelSpec.black_scholes(), "P", 0.0, grid, 10, 1)


def test_simulation_needs_paths():
    with pytest.raises(ValueError):
        simulate_paths(ModelSpec.black_scholes(), "P", 0.0, GRID, 0, 1)


def test_pathset_roundtrips(tmp_path):
    ps = simulate_paths(ModelSpec.merton(), "P", math.log(100), GRID[:5], 20, 9)
    ps.save(tmp_path / "p.npz")
    back = PathSet.load(tmp_path / "p.npz")
    assert np.array_equal(back.values, ps.values) and back.seed == 9
    ps.to_csv(tmp_path / "p.csv")
    csv = PathSet.from_csv(tmp_path / "p.csv", seed=9)
    assert np.array_equal(csv.values, ps.values) and np.array_equal(csv.grid, ps.grid)


def test_pathset_validation():
    with pytest.raises(ValueError):
        PathSet(np.zeros((2, 3)), [0.0, 1.0], 0)
    with pytest.raises(ValueError):
        PathSet(np.array([[0.0, np.nan]]), [0.0, 1.0], 0)
