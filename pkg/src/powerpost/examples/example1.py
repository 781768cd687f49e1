"""Linear-Gaussian model ``y = A theta + eps`` with closed-form oracles.

Prior ``theta ~ N(mu_p, sigma_p2)``, noise ``eps ~ N(0, sigma_eps2)``.  Every
power posterior is Gaussian, so the expected deviance, the tractile function
and the evidence are all available exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import RandomStream
from ..errors import ParameterError
from ..likelihood import Dataset, LikelihoodModel


@dataclass(frozen=True)
class Example1Config:
    A: float = 101.0
    sigma_p2: float = 1e-2
    sigma_eps2: float = 4.0
    mu_p: float = 1.0
    theta_t: float = 1.1

    def __post_init__(self):
        if not (self.sigma_p2 >= 0.0 and self.sigma_eps2 > 0.0):
            raise ParameterError("variances must be positive")


def _sigma_alpha2(cfg, alpha):
    return cfg.A ** 2 * cfg.sigma_p2 * alpha + cfg.sigma_eps2


def analytic_deviance(cfg: Example1Config, y: float, alpha):
    """Exact ``E_alpha[log p(y|theta)]``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    s2 = _sigma_alpha2(cfg, alpha)
    r = y - cfg.A * cfg.mu_p
    return -0.5 * (math.log(2.0 * math.pi * cfg.sigma_eps2) + cfg.A ** 2 * cfg.sigma_p2 / s2
                   + r * r * cfg.sigma_eps2 / s2 ** 2)


def analytic_log_evidence(cfg: Example1Config, y: float, alpha):
    """Exact ``log E[p^alpha]`` under the prior."""
    alpha = np.asarray(alpha, dtype=np.float64)
    s2 = _sigma_alpha2(cfg, alpha)
    r = y - cfg.A * cfg.mu_p
    return (-0.5 * alpha * math.log(2.0 * math.pi * cfg.sigma_eps2)
            + 0.5 * np.log(cfg.sigma_eps2 / s2) - 0.5 * alpha * r * r / s2)


def analytic_tractile(cfg: Example1Config, y: float, alpha):
    """Exact ``h(alpha) = E[p^alpha log p]``, the derivative of the evidence.

    Equals ``exp(log_evidence) * deviance``; note the factor
    ``sqrt(sigma_eps2 / sigma_alpha2)`` carried by the evidence.
    """
    return np.exp(analytic_log_evidence(cfg, y, alpha)) * analytic_deviance(cfg, y, alpha)


class AnalyticTractile:
    """Tractile source backed by the closed forms (no sampling error)."""

    def __init__(self, cfg: Example1Config, y: float):
        self.cfg = cfg
        self.y = float(y)

    def h(self, alphas):
        return analytic_tractile(self.cfg, self.y, np.atleast_1d(alphas))

    def signed_log_h(self, alphas):
        a = np.atleast_1d(alphas)
        dev = analytic_deviance(self.cfg, self.y, a)
        return np.sign(dev), analytic_log_evidence(self.cfg, self.y, a) + np.log(np.abs(dev))

    def log_evidence(self, alphas):
        return analytic_log_evidence(self.cfg, self.y, np.atleast_1d(alphas))


def conjugate_transition(cfg: Example1Config, y: float, alpha: float):
    """Mean and variance of the Gaussian power posterior at ``alpha``."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError("alpha must lie in [0, 1]")
    var = 1.0 / (1.0 / cfg.sigma_p2 + alpha * cfg.A ** 2 / cfg.sigma_eps2)
    mean = var * (cfg.mu_p / cfg.sigma_p2 + alpha * cfg.A * y / cfg.sigma_eps2)
    return mean, var


def model(cfg: Example1Config) -> LikelihoodModel:
    a = cfg.A
    return LikelihoodModel(
        forward=lambda th: np.array([[a * th[0]]]),
        batch_forward=lambda ths: (a * ths[:, 0])[:, None, None],
        distance="euclidean",
        dispersion=0.5 / cfg.sigma_eps2,
        log_c=-0.5 * math.log(2.0 * math.pi * cfg.sigma_eps2),
    )


def prior_sampler(cfg: Example1Config):
    sd = math.sqrt(cfg.sigma_p2)

    def sample(gen: np.random.Generator, n: int) -> np.ndarray:
        return cfg.mu_p + sd * gen.standard_normal((n, 1))

    return sample


def prior_logpdf(cfg: Example1Config):
    def logpdf(thetas) -> np.ndarray:
        th = np.atleast_2d(thetas)[:, 0]
        return -0.5 * math.log(2.0 * math.pi * cfg.sigma_p2) - 0.5 * (th - cfg.mu_p) ** 2 / cfg.sigma_p2

    return logpdf


def generate_data(cfg: Example1Config, stream: RandomStream) -> Dataset:
    """One observation ``y = A theta_t + eps``."""
    y = cfg.A * cfg.theta_t + math.sqrt(cfg.sigma_eps2) * stream.normal()
    return Dataset(values=([y],), metadata={"example": 1})


def default_box(cfg: Example1Config, y: float, alpha: float, width: float = 8.0):
    """Interval of +-``width`` power-posterior standard deviations around the mean."""
    mean, var = conjugate_transition(cfg, y, alpha)
    sd = math.sqrt(var)
    return [(mean - width * sd, mean + width * sd)]
