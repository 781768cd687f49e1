import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from powerpost.core import RandomStream
from powerpost.errors import DomainError, NumericError, ParameterError
from powerpost.examples import example1 as e1
from powerpost.examples import example2 as e2
from powerpost.likelihood import (Dataset, Euclidean, LikelihoodModel, Wasserstein, log_likelihood,
                                  sq_euclidean, wasserstein2_1d)


@pytest.mark.parametrize("u, v, expected", [([1, 2], [1, 2], 0.0), ([0], [3], 9.0),
                                            ([1, 0, 2], [0, 1, 0], 6.0)])
def test_sq_euclidean_examples(u, v, expected):
    assert sq_euclidean(u, v) == expected


def test_sq_euclidean_length_mismatch():
    with pytest.raises(ParameterError):
        sq_euclidean([1, 2], [1])


def test_w2_identical_is_zero():
    u = np.array([0.3, -1.0, 2.0, 0.5])
    assert wasserstein2_1d(u, u) == pytest.approx(0.0, abs=1e-24)


def test_w2_unit_spike_translation():
    u = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])
    assert wasserstein2_1d(u, v) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("shift", [1, 2, 3, 5])
def test_w2_spike_scaling(shift):
    u = np.zeros(12)
    u[2] = 1.0
    v = np.zeros(12)
    v[2 + shift] = 1.0
    assert wasserstein2_1d(u, v) == pytest.approx(shift ** 2, rel=1e-9)


def _w2_oracle(u, v, m=10_000):
    """Brute-force quantile matching of the normalized signals on a fine grid."""
    c = min(u.min(), v.min())
    p, q = u - c + 1e-12, v - c + 1e-12
    cp, cq = np.cumsum(p) / p.sum(), np.cumsum(q) / q.sum()
    t = np.arange(u.size, dtype=float)
    s = (np.arange(m) + 0.5) / m
    xp = t[np.minimum(np.searchsorted(cp, s), u.size - 1)]
    xq = t[np.minimum(np.searchsorted(cq, s), u.size - 1)]
    return float(np.mean((xp - xq) ** 2))


def test_w2_four_sample_oracle():
    u = np.array([0.2, 1.0, 0.0, 0.6])
    v = np.array([0.9, 0.1, 0.4, 0.3])
    assert wasserstein2_1d(u, v) == pytest.approx(_w2_oracle(u, v), abs=5e-4)


def test_w2_support_scaling():
    u = np.array([0.2, 1.0, 0.0, 0.6])
    v = np.array([0.9, 0.1, 0.4, 0.3])
    assert wasserstein2_1d(u, v, support=0.5 * np.arange(4)) == pytest.approx(
        0.25 * wasserstein2_1d(u, v), rel=1e-12)


def test_w2_degenerate_mass():
    with pytest.raises(NumericError, match="zero total mass"):
        wasserstein2_1d(np.ones(5), np.ones(5))
    with pytest.raises(NumericError):
        wasserstein2_1d(np.array([0.0, np.nan]), np.array([1.0, 0.0]))
    with pytest.raises(ParameterError):
        wasserstein2_1d(np.ones(3), np.ones(4))


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, 8, elements=st.floats(-5, 5)),
       hnp.arrays(np.float64, 8, elements=st.floats(-5, 5)))
def test_distance_symmetry(u, v):
    assert Euclidean()(u, v) == Euclidean()(v, u)
    try:
        a = Wasserstein()(u, v)
    except NumericError:
        return
    assert a == pytest.approx(Wasserstein()(v, u), rel=1e-9, abs=1e-12)
    assert a >= 0.0


def test_example1_loglik_examples():
    cfg = e1.Example1Config()
    mdl = e1.model(cfg)
    theta = 1.05
    y = cfg.A * theta
    zero = log_likelihood(mdl, Dataset(values=([y],)), [theta])
    assert zero == pytest.approx(-0.5 * math.log(2 * math.pi * 4.0), rel=1e-15)
    two = log_likelihood(mdl, Dataset(values=([y + 2.0],)), [theta])
    assert two == pytest.approx(-0.5 * math.log(8 * math.pi) - 0.5, rel=1e-14)
    assert two == pytest.approx(-2.1121, abs=1e-4)


def test_example2_loglik_structure():
    cfg = e2.Example2Config(N_T=31)
    data = e2.generate_data(cfg, RandomStream(1))
    mdl = e2.model(cfg)
    th = np.array([[0.2, 0.7, 1.0]])
    dis = mdl.discrepancy_many(data, mdl.predict_many(th[:, :2]))[0]
    ref = sum(wasserstein2_1d(y, g, data.support)
              for y, g in zip(data.values, e2.forward_signals(cfg, th[:, :2])[0]))
    assert dis == pytest.approx(ref, rel=1e-12)
    assert mdl.log_likelihood(data, th[0]) == pytest.approx(-ref, rel=1e-12)


def test_forward_eval_counting():
    cfg = e1.Example1Config()
    mdl = e1.model(cfg)
    data = Dataset(values=([110.0],))
    mdl.log_likelihood(data, [1.0])
    mdl.log_likelihood_many(data, np.ones((7, 1)))
    assert mdl.forward_evals == 8


def test_domain_violation():
    mdl = LikelihoodModel(forward=lambda th: np.array([[th[0]]]), domain=lambda th: th[0] > 0)
    data = Dataset(values=([1.0],))
    assert mdl.log_likelihood(data, [2.0]) == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        mdl.log_likelihood(data, [-1.0])


def test_model_and_dataset_validation():
    with pytest.raises(ParameterError):
        LikelihoodModel(forward=lambda th: th, dispersion=0.0)
    with pytest.raises(ParameterError):
        Dataset(values=())
    with pytest.raises(ParameterError):
        Dataset(values=([1.0, 2.0], [1.0]))
    with pytest.raises(ParameterError):
        Dataset(values=([1.0, 2.0],), support=[0.0])
    mdl = LikelihoodModel(forward=lambda th: np.array([[th[0], th[0]]]))
    with pytest.raises(ParameterError):
        mdl.log_likelihood(Dataset(values=([1.0],)), [1.0])


def test_loglik_continuity_probe():
    cfg = e2.Example2Config(N_T=41, noiseless=True)
    data = e2.generate_data(cfg, RandomStream(0))
    mdl = e2.model(cfg, fixed_s=2.0)
    rng = np.random.default_rng(4)
    th = np.column_stack([rng.uniform(-1, 2, 100), rng.uniform(0.05, 2, 100)])
    base = mdl.log_likelihood_many(data, th)
    nudged = mdl.log_likelihood_many(data, th + 1e-7)
    assert np.max(np.abs(nudged - base)) < 1e-3
