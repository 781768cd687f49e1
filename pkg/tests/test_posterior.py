import csv
import json
import math

import numpy as np
import pytest
from scipy import stats

from powerpost.core import RandomStream, make_grid
from powerpost.deviance import PriorEnsemble, build_ensemble, deviance_curve
from powerpost.errors import DegenerateDensityError, NumericError, ParameterError
from powerpost.examples import example1 as e1
from powerpost.likelihood import Dataset
from powerpost.posterior import (GriddedDensity, grid_density, grid_inverse_cdf_sample,
                                 log_power_posterior, marginal, normalization, perturb, power,
                                 sir_sample, write_field)

CFG = e1.Example1Config()
Y = 111.1
DATA = Dataset(values=([Y],))
CURVE = deviance_curve(e1.AnalyticTractile(CFG, Y), make_grid(200))
X = np.linspace(-8, 8, 2001)


def gauss(mu=0.0, var=1.0):
    return GriddedDensity.from_values((X,), stats.norm(mu, math.sqrt(var)).pdf(X))


def field(alpha, resolution=2001, box=None):
    mdl = e1.model(CFG)
    box = box or e1.default_box(CFG, Y, alpha)
    return grid_density(mdl, DATA, e1.prior_logpdf(CFG), CURVE, box, resolution, alpha)


# pointwise transition density ------------------------------------------------

def test_log_power_posterior_prior_stage():
    mdl = e1.model(CFG)
    lp = e1.prior_logpdf(CFG)
    for th in (0.8, 1.0, 1.3):
        assert log_power_posterior(mdl, DATA, lp, CURVE, [th], 0.0) == lp(np.array([[th]]))[0]
    assert mdl.forward_evals == 0


def test_power_bayes_ratio():
    mdl = e1.model(CFG)
    lp = e1.prior_logpdf(CFG)
    a, t1, t2 = 0.6, 1.02, 1.11
    lhs = (log_power_posterior(mdl, DATA, lp, CURVE, [t1], a)
           - log_power_posterior(mdl, DATA, lp, CURVE, [t2], a))
    rhs = (lp(np.array([[t1]]))[0] + a * mdl.log_likelihood(DATA, [t1])
           - lp(np.array([[t2]]))[0] - a * mdl.log_likelihood(DATA, [t2]))
    assert math.exp(lhs - rhs) == pytest.approx(1.0, abs=1e-12)


def test_log_power_posterior_outside_support():
    box_prior = lambda th: np.where(np.atleast_2d(th)[:, 0] > 0, 0.0, -np.inf)
    assert log_power_posterior(e1.model(CFG), DATA, box_prior, CURVE, [-1.0], 0.5) == -math.inf
    with pytest.raises(ParameterError):
        log_power_posterior(e1.model(CFG), DATA, box_prior, CURVE, [1.0], 1.2)


# lattice fields ----------------------------------------------------------------

def test_prior_field_normalized_without_forward_evals():
    fld = field(0.0, 512, [(0.5, 1.5)])
    assert abs(normalization(fld) - 1.0) <= 1e-6
    assert fld.metadata["forward_evals_grid"] == 0
    prior = e1.prior_logpdf(CFG)(fld.nodes())
    assert np.max(np.abs(fld.log_density - prior)) <= 1e-12


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_field_matches_conjugate_transition(alpha):
    fld = field(alpha)
    dens = fld.to_density()
    mu, var = e1.conjugate_transition(CFG, Y, alpha)
    assert dens.mean()[0] == pytest.approx(mu, rel=1e-4)
    assert dens.variance()[0] == pytest.approx(var, rel=1e-4)
    assert abs(normalization(fld) - 1.0) <= 1e-6
    assert fld.metadata["normalization"] == normalization(fld)


def test_field_argmax_within_one_cell():
    fld = field(1.0, 512)
    mu, _ = e1.conjugate_transition(CFG, Y, 1.0)
    assert abs(fld.argmax()[0] - mu) <= fld.cell_measure


def test_field_counts_lattice_evaluations_and_warns():
    fld = field(0.5, 64, [(1.0, 1.05)])
    assert fld.metadata["forward_evals_grid"] == 64
    assert "warning" in fld.metadata and "prior mass" in fld.metadata["warning"]
    assert "warning" not in field(0.5, 512, [(0.5, 1.5)]).metadata


def test_field_validation():
    with pytest.raises(ParameterError):
        field(0.5, 8)
    with pytest.raises(ParameterError):
        field(0.5, 32, [(0, 1), (0, 1), (0, 1)])
    with pytest.raises(ParameterError):
        field(0.5, 32, [(1.0, 0.0)])


def test_power_posterior_as_density_algebra():
    a = 0.4
    fld = field(a).to_density()
    x = fld.axes[0]
    prior = GriddedDensity.from_values((x,), np.exp(e1.prior_logpdf(CFG)(x[:, None])))
    lik = GriddedDensity.from_values((x,), np.exp(e1.model(CFG).log_likelihood_many(DATA, x[:, None])))
    built = perturb(prior, power(lik, a))
    assert np.max(np.abs(built.values - fld.values)) <= 1e-8 * np.max(fld.values)


# marginals -------------------------------------------------------------------------

def _grid2(f):
    x = np.linspace(-4, 4, 161)
    y = np.linspace(-3, 5, 121)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    return GriddedDensity.from_values((x, y), f(xx, yy)), x, y


def test_marginal_of_product():
    g, x, _ = _grid2(lambda a, b: stats.norm(0.5, 0.7).pdf(a) * stats.gamma(3).pdf(b + 3))
    m = marginal(g, 0)
    ref = GriddedDensity.from_values((x,), stats.norm(0.5, 0.7).pdf(x))
    assert np.max(np.abs(m.values - ref.values)) <= 1e-8


def test_marginal_mean_of_symmetric_gaussian():
    rho = 0.4
    cov = [[1.0, rho], [rho, 1.0]]
    g, _, _ = _grid2(lambda a, b: stats.multivariate_normal([0.3, 1.0], cov).pdf(
        np.stack([a, b], axis=-1)))
    for axis in (0, 1):
        assert marginal(g, axis).mean()[0] == pytest.approx(g.mean()[axis], abs=1e-6)


def test_marginal_uniform_and_errors():
    g, x, _ = _grid2(lambda a, b: np.ones_like(a))
    np.testing.assert_allclose(marginal(g, 1).values, 1.0 / 8.0, rtol=1e-12)
    with pytest.raises(ParameterError):
        marginal(gauss(), 0)
    with pytest.raises(ParameterError):
        marginal(g, 2)


# sampling ------------------------------------------------------------------------

def _ens(seed=0, n=10_000):
    root = RandomStream(seed)
    data = e1.generate_data(CFG, root.spawn(0))
    return build_ensemble(e1.prior_sampler(CFG), e1.model(CFG), data, n, root.spawn(1)), data


def test_sir_prior_stage_and_flat_weights():
    ens, _ = _ens(n=500)
    out = sir_sample(ens, 0.0, 500, RandomStream(3))
    assert out.ess == pytest.approx(500.0)
    assert set(out.thetas[:, 0]) <= set(ens.thetas[:, 0])
    # systematic resampling with equal weights returns every draw once
    assert np.array_equal(np.sort(out.thetas[:, 0]), np.sort(ens.thetas[:, 0]))
    flat = PriorEnsemble(ens.thetas, np.full(500, -3.2), 0, 500)
    assert sir_sample(flat, 0.9, 100, RandomStream(3)).ess == pytest.approx(500.0)


def test_sir_degeneracy_warning():
    ll = np.array([0.0, -1000.0, -1000.0, -1000.0])
    ens = PriorEnsemble(np.arange(4.0)[:, None], ll, 0, 4)
    with pytest.warns(RuntimeWarning, match="effective sample size"):
        out = sir_sample(ens, 1.0, 10, RandomStream(0))
    assert out.warning is not None and np.all(out.thetas == 0.0)


def test_sir_example1_posterior_mean():
    ens, data = _ens(n=100_000)
    y = data.values[0][0]
    mu, var = e1.conjugate_transition(CFG, y, 1.0)
    n_out = 2000
    out = sir_sample(ens, 1.0, n_out, RandomStream(11))
    sd = math.sqrt(var)
    assert abs(out.thetas.mean() - mu) <= 3 * (sd / math.sqrt(n_out) + sd / math.sqrt(out.ess))


def test_grid_sampler_uniform_ks():
    u = GriddedDensity.from_values((np.linspace(0, 1, 101),), np.ones(101))
    draws = grid_inverse_cdf_sample(u, 10_000, RandomStream(5))[:, 0]
    assert stats.kstest(draws, "uniform").pvalue > 0.01


def test_grid_sampler_gaussian_moments():
    g = gauss(0.7, 0.5)
    n = 20_000
    d = grid_inverse_cdf_sample(g, n, RandomStream(6))[:, 0]
    mu, var = g.mean()[0], g.variance()[0]
    assert abs(d.mean() - mu) <= 3 * math.sqrt(var / n)
    assert abs(d.var() - var) <= 3 * var * math.sqrt(2.0 / n)


def test_grid_sampler_zero_cell_and_errors():
    two = GriddedDensity.from_values((np.array([0.0, 1.0, 2.0, 3.0]),), [0.0, 0.0, 1.0, 1.0])
    assert np.all(grid_inverse_cdf_sample(two, 1000, RandomStream(1)) > 1.0)
    fld = field(0.5, 64)
    dead = type(fld)(fld.box, fld.resolution, 0.5, np.full_like(fld.log_density, -np.inf))
    with pytest.raises(NumericError):
        grid_inverse_cdf_sample(dead, 5, RandomStream(0))


def test_grid_sampler_2d():
    g, _, _ = _grid2(lambda a, b: stats.multivariate_normal([0.3, 1.0], [[1, 0.5], [0.5, 2]]).pdf(
        np.stack([a, b], axis=-1)))
    d = grid_inverse_cdf_sample(g, 5000, RandomStream(2))
    mu = g.mean()
    sd = np.sqrt(g.variance())
    assert np.all(np.abs(d.mean(axis=0) - mu) <= 3 * sd / math.sqrt(5000))


def test_sir_and_grid_sampling_agree():
    n_out = 1000
    for seed in range(30):
        ens, data = _ens(seed, 20_000)
        y = data.values[0][0]
        curve = deviance_curve(e1.AnalyticTractile(CFG, y), make_grid(100))
        fld = grid_density(e1.model(CFG), data, e1.prior_logpdf(CFG), curve,
                           e1.default_box(CFG, y, 1.0), 512, 1.0)
        stream = RandomStream(seed).spawn(2)
        a = sir_sample(ens, 1.0, n_out, stream).thetas[:, 0]
        b = grid_inverse_cdf_sample(fld, n_out, stream)[:, 0]
        se = math.sqrt(a.var() / n_out + b.var() / n_out)
        assert abs(a.mean() - b.mean()) <= 4 * se


# density algebra -----------------------------------------------------------------

def test_perturb_examples():
    f = gauss(0.5, 2.0)
    flat = GriddedDensity.from_values((X,), np.ones_like(X))
    np.testing.assert_allclose(perturb(f, flat).values, f.values, rtol=1e-12)
    half = perturb(gauss(), gauss())
    assert np.max(np.abs(half.values - stats.norm(0, math.sqrt(0.5)).pdf(X))) <= 1e-6
    g = gauss(-1.0, 0.3)
    np.testing.assert_array_equal(perturb(f, g).values, perturb(g, f).values)


def test_perturb_errors():
    a = GriddedDensity.from_values((X,), (X < 0).astype(float))
    b = GriddedDensity.from_values((X,), (X > 1).astype(float))
    with pytest.raises(DegenerateDensityError):
        perturb(a, b)
    other = GriddedDensity.from_values((np.linspace(-8, 8, 11),), np.ones(11))
    with pytest.raises(ParameterError):
        perturb(a, other)


def test_power_examples():
    f = gauss(0.4, 1.5)
    np.testing.assert_allclose(power(f, 1.0).values, f.values, rtol=1e-14)
    sq = power(f, 2.0)
    assert np.max(np.abs(sq.values - stats.norm(0.4, math.sqrt(0.75)).pdf(X))) <= 1e-6
    flat = GriddedDensity.from_values((X,), np.ones_like(X))
    np.testing.assert_allclose(power(flat, 3.3).values, flat.values, rtol=1e-14)
    for r in (0.0, -1.0):
        with pytest.raises(ParameterError):
            power(f, r)


def test_power_distributes_over_perturb():
    f = GriddedDensity.from_values((X,), stats.t(4).pdf(X))
    lhs = power(f, 0.7 + 1.9)
    rhs = perturb(power(f, 0.7), power(f, 1.9))
    assert np.max(np.abs(lhs.values - rhs.values)) <= 1e-8


# serialization -------------------------------------------------------------------

def test_write_field(tmp_path):
    fld = field(0.5, 32)
    write_field(fld, tmp_path / "f.csv", tmp_path / "f.json", {"forward_evals_ensemble": 0})
    rows = list(csv.reader((tmp_path / "f.csv").open()))
    assert rows[0] == ["theta1", "log_density", "density"] and len(rows) == 33
    assert float(rows[5][2]) == pytest.approx(math.exp(float(rows[5][1])), rel=1e-15)
    meta = json.loads((tmp_path / "f.json").read_text())
    for key in ("box", "resolution", "alpha", "normalization", "forward_evals_grid",
                "forward_evals_ensemble"):
        assert key in meta


def test_write_field_2d_header(tmp_path):
    box_prior = lambda th: np.zeros(np.atleast_2d(th).shape[0])
    mdl = e1.model(CFG)
    fld = grid_density(mdl, DATA, box_prior, CURVE, [(0, 1), (0, 2)], 16, 0.0)
    write_field(fld, tmp_path / "g.csv")
    rows = list(csv.reader((tmp_path / "g.csv").open()))
    assert rows[0] == ["theta1", "theta2", "log_density", "density"]
    assert [float(v) for v in rows[2][:2]] == [0.0, pytest.approx(2 / 15)]
