"""Source inversion for the 1-D wave equation with speckle and uniform noise.

Seven receivers record ``u(t, x_r)`` where ``u`` is the d'Alembert solution
started from a three-bump pulse centred at ``x0`` with amplitude ``a``.  The
likelihood compares signals with the squared 2-Wasserstein distance and
carries a random dispersion ``s``:

    log p(Y | x0, a, s) = N_T log s - s * sum_r W2(y_r, g_r(x0, a)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from ..core import RandomStream
from ..errors import ParameterError
from ..likelihood import Dataset, LikelihoodModel, Wasserstein

PULSE_WIDTH = 100.0
PULSE_OFFSETS = (-0.5, 0.0, 0.5)


@dataclass(frozen=True)
class Example2Config:
    receivers: tuple = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
    T: float = 5.0
    N_T: int = 101
    theta_t: tuple = (0.0, 0.5)
    # multiplicative Gamma(shape, scale) noise, mean shape * scale = 1
    speckle_shape: float = 60.0
    speckle_scale: float = 1.0 / 60.0
    uniform_half_width: float = 0.25
    # prior: x0 ~ U(x0_range), a ~ U(a_range), s ~ Gamma(s_shape, rate=s_rate);
    # the boxes are deliberately not centred on theta_t
    x0_range: tuple = (-1.0, 2.0)
    a_range: tuple = (0.0, 2.0)
    s_shape: float = 1.0
    s_rate: float = 0.1
    noiseless: bool = False

    def __post_init__(self):
        if int(self.N_T) != self.N_T or self.N_T < 2:
            raise ParameterError("N_T must be an integer >= 2")
        if len(set(self.receivers)) != len(self.receivers):
            raise ParameterError("receiver locations must be distinct")
        if not (self.T > 0 and self.s_shape > 0 and self.s_rate > 0):
            raise ParameterError("T and the s-prior parameters must be positive")
        for lo, hi in (self.x0_range, self.a_range):
            if not hi > lo:
                raise ParameterError("prior ranges need low < high")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, int(self.N_T))


def initial_pulse(x, x0, a):
    """``a * sum_j exp(-100 (x - x0 + d_j)^2)`` over offsets ``d_j = -0.5, 0, 0.5``."""
    z = np.asarray(x, dtype=np.float64) - x0
    return a * sum(np.exp(-PULSE_WIDTH * (z + d) ** 2) for d in PULSE_OFFSETS)


def forward(t, x, theta):
    """d'Alembert solution ``u(t, x) = (u0(x - t) + u0(x + t)) / 2``."""
    x0, a = float(theta[0]), float(theta[1])
    return 0.5 * initial_pulse(np.subtract(x, t), x0, a) + 0.5 * initial_pulse(np.add(x, t), x0, a)


def forward_signals(cfg: Example2Config, thetas) -> np.ndarray:
    """Receiver signals for many parameters: ``(N, n_receivers, N_T)``."""
    th = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    x0 = th[:, 0][:, None, None]
    a = th[:, 1][:, None, None]
    xr = np.asarray(cfg.receivers, dtype=np.float64)[None, :, None]
    t = cfg.times[None, None, :]
    return 0.5 * (initial_pulse(xr - t, x0, a) + initial_pulse(xr + t, x0, a))


def generate_data(cfg: Example2Config, stream: RandomStream, theta_t=None) -> Dataset:
    theta_t = cfg.theta_t if theta_t is None else theta_t
    g = forward_signals(cfg, [theta_t])[0]
    if cfg.noiseless:
        y = g
    else:
        gen = stream.generator
        eps1 = gen.gamma(cfg.speckle_shape, cfg.speckle_scale, size=g.shape)
        eps2 = gen.uniform(-cfg.uniform_half_width, cfg.uniform_half_width, size=g.shape)
        y = eps1 * g + eps2
    return Dataset(values=tuple(y), support=cfg.times,
                   metadata={"example": 2, "receivers": list(cfg.receivers)})


class Example2Model(LikelihoodModel):
    """Wasserstein likelihood over ``(x0, a, s)``.

    Two-column parameter arrays use ``fixed_s`` for the dispersion, which is
    how lattices over ``(x0, a)`` condition on a value of ``s``.
    """

    def __init__(self, cfg: Example2Config, fixed_s=None):
        super().__init__(forward=lambda th: forward_signals(cfg, th[None, :2])[0],
                         batch_forward=lambda ths: forward_signals(cfg, ths[:, :2]),
                         distance=Wasserstein(), dispersion=1.0, log_c=0.0)
        self.cfg = cfg
        self.fixed_s = fixed_s

    def log_likelihood_from_discrepancy(self, thetas, dis):
        th = np.atleast_2d(thetas)
        if th.shape[1] >= 3:
            s = th[:, 2]
        elif self.fixed_s is not None:
            s = np.full(th.shape[0], float(self.fixed_s))
        else:
            raise ParameterError("two-parameter input needs fixed_s")
        dis = np.asarray(dis, dtype=np.float64)
        out = np.full(s.shape, -np.inf)
        ok = s > 0.0
        out[ok] = self.cfg.N_T * np.log(s[ok]) - s[ok] * dis[ok]
        return out


def model(cfg: Example2Config, fixed_s=None) -> Example2Model:
    return Example2Model(cfg, fixed_s)


def prior_sampler(cfg: Example2Config):
    def sample(gen: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty((n, 3))
        out[:, 0] = gen.uniform(*cfg.x0_range, size=n)
        out[:, 1] = gen.uniform(*cfg.a_range, size=n)
        out[:, 2] = gen.gamma(cfg.s_shape, 1.0 / cfg.s_rate, size=n)
        return out

    return sample


def prior_logpdf(cfg: Example2Config, with_s: bool = True):
    """Log prior density over ``(x0, a, s)``, or over ``(x0, a)`` if ``with_s`` is False."""
    (x_lo, x_hi), (a_lo, a_hi) = cfg.x0_range, cfg.a_range
    log_box = -math.log(x_hi - x_lo) - math.log(a_hi - a_lo)
    s_prior = stats.gamma(cfg.s_shape, scale=1.0 / cfg.s_rate)

    def logpdf(thetas) -> np.ndarray:
        th = np.atleast_2d(thetas)
        inside = ((th[:, 0] >= x_lo) & (th[:, 0] <= x_hi) & (th[:, 1] >= a_lo) & (th[:, 1] <= a_hi))
        out = np.where(inside, log_box, -np.inf)
        if with_s:
            out = out + s_prior.logpdf(th[:, 2])
        return out

    return logpdf


def log_tilt_marginal(cfg: Example2Config, dis, alpha: float) -> np.ndarray:
    """``log int pi(s) p(Y | x0, a, s)^alpha ds`` given the summed distances ``dis``.

    The Gamma prior on ``s`` is conjugate to ``s^(alpha N_T) exp(-alpha s dis)``:
    the integral is ``b^k Gamma(k + alpha N_T) / (Gamma(k) (b + alpha dis)^(k + alpha N_T))``
    with shape ``k`` and rate ``b``.
    """
    k, b = cfg.s_shape, cfg.s_rate
    kk = k + alpha * cfg.N_T
    return k * math.log(b) + gammaln(kk) - gammaln(k) - kk * np.log(b + alpha * np.asarray(dis))


def marginal_tilt(cfg: Example2Config, data: Dataset, mdl: "Example2Model"):
    """``log_tilt`` callable for lattices over ``(x0, a)`` with ``s`` integrated out."""
    def tilt(thetas, alpha):
        dis = mdl.discrepancy_many(data, mdl.predict_many(np.atleast_2d(thetas)[:, :2]))
        return log_tilt_marginal(cfg, dis, alpha)

    return tilt


def default_box(cfg: Example2Config):
    return [tuple(cfg.x0_range), tuple(cfg.a_range)]
