"""Power-posterior densities on parameter lattices, sampling, and density algebra.

The transition density is evaluated in closed form,

    log pi(theta | Y; a) = log pi(theta) + a * l(theta) - int_0^a phi1,

so its normalization is a prediction of the deviance curve, never imposed.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import logsumexp

from .core import RandomStream
from .deviance import DevianceCurve, PriorEnsemble, integrated_deviance
from .errors import DegenerateDensityError, DomainError, NumericError, ParameterError
from .likelihood import Dataset, LikelihoodModel

PRIOR_MASS_FLOOR = 0.999
ESS_FLOOR = 10.0
MIN_RESOLUTION = 16


def _trapz_nd(values: np.ndarray, axes: Sequence[np.ndarray]) -> float:
    out = values
    for ax in reversed(axes):
        out = trapezoid(out, ax, axis=-1)
    return float(out)


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha!r}")


@dataclass(frozen=True)
class GriddedDensity:
    """Nonnegative values on a 1-D or 2-D tensor grid, normalized to unit trapezoid mass."""

    axes: tuple
    values: np.ndarray

    @classmethod
    def from_values(cls, axes, values) -> "GriddedDensity":
        axes = tuple(np.asarray(a, dtype=np.float64) for a in axes)
        v = np.asarray(values, dtype=np.float64)
        if v.shape != tuple(a.size for a in axes):
            raise ParameterError(f"values of shape {v.shape} do not fit the axes")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ParameterError("density values must be finite and non-negative")
        mass = _trapz_nd(v, axes)
        if not mass > 0.0:
            raise DegenerateDensityError("density has zero mass on the grid")
        return cls(axes, v / mass)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def cell_measure(self) -> float:
        return float(np.prod([a[1] - a[0] for a in self.axes]))

    def integral(self) -> float:
        return _trapz_nd(self.values, self.axes)

    def mean(self) -> np.ndarray:
        return np.array([_trapz_nd(self.values * _coord(self.axes, i), self.axes)
                         for i in range(self.ndim)])

    def variance(self) -> np.ndarray:
        mu = self.mean()
        return np.array([_trapz_nd(self.values * (_coord(self.axes, i) - mu[i]) ** 2, self.axes)
                         for i in range(self.ndim)])


def _coord(axes, i):
    shape = [1] * len(axes)
    shape[i] = axes[i].size
    return axes[i].reshape(shape)


def _same_grid(f: GriddedDensity, g: GriddedDensity):
    if f.ndim != g.ndim or any(a.shape != b.shape or not np.array_equal(a, b)
                               for a, b in zip(f.axes, g.axes)):
        raise ParameterError("densities live on different grids")


@dataclass(frozen=True)
class PowerPosteriorField:
    """Raw (un-renormalized) log transition density on a lattice over ``box``."""

    box: tuple
    resolution: tuple
    alpha: float
    log_density: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def axes(self) -> tuple:
        return tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(self.box, self.resolution))

    @property
    def cell_measure(self) -> float:
        return float(np.prod([(hi - lo) / (n - 1) for (lo, hi), n in zip(self.box, self.resolution)]))

    @property
    def density(self) -> np.ndarray:
        return np.exp(self.log_density)

    def nodes(self) -> np.ndarray:
        """Grid nodes as an ``(n_nodes, d)`` array in row-major order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_density(self) -> GriddedDensity:
        return GriddedDensity.from_values(self.axes, self.density)

    def argmax(self) -> np.ndarray:
        idx = np.unravel_index(int(np.argmax(self.log_density)), self.log_density.shape)
        return np.array([ax[i] for ax, i in zip(self.axes, idx)])


def log_power_posterior(model: LikelihoodModel, data: Dataset, prior_logpdf: Callable,
                        curve: DevianceCurve, theta, alpha: float) -> float:
    """Log transition density at one parameter vector (one forward evaluation).

    Outside the prior support or the model domain the result is ``-inf``.
    """
    _check_alpha(alpha)
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    lp = float(np.asarray(prior_logpdf(theta[None, :])).ravel()[0])
    if alpha == 0.0 or lp == -math.inf:
        return lp
    try:
        ll = model.log_likelihood(data, theta)
    except DomainError:
        return -math.inf
    return lp + alpha * ll - integrated_deviance(curve, alpha)


def _box(box, d=None):
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if not 1 <= len(box) <= 2:
        raise ParameterError("fields support one or two dimensions")
    if any(not hi > lo for lo, hi in box):
        raise ParameterError("box bounds must satisfy low < high")
    return box


def grid_density(model: LikelihoodModel, data: Dataset, prior_logpdf: Callable,
                 curve: DevianceCurve, box, resolution, alpha: float,
                 log_tilt: Optional[Callable] = None) -> PowerPosteriorField:
    """Evaluate the transition density on a ``resolution``-node lattice over ``box``.

    ``log_tilt(thetas, alpha)`` replaces the default ``alpha * l(theta)`` term,
    for lattices over a subset of the parameters where the remaining ones
    are integrated out of ``p^alpha`` against their prior.
    The metadata records the trapezoid normalization, the number of forward
    evaluations spent on the lattice, and a warning if the box misses more
    than 0.1% of the prior mass.
    """
    _check_alpha(alpha)
    box = _box(box)
    res = tuple(int(resolution) for _ in box) if np.isscalar(resolution) else tuple(map(int, resolution))
    if len(res) != len(box) or min(res) < MIN_RESOLUTION:
        raise ParameterError(f"resolution must be >= {MIN_RESOLUTION} per dimension")
    shape = res
    tmp = PowerPosteriorField(box, res, alpha, np.zeros(shape))
    nodes = tmp.nodes()
    lp = np.asarray(prior_logpdf(nodes), dtype=np.float64).reshape(-1)
    logd = lp.copy()
    evals = 0
    if alpha > 0.0:
        inside = np.isfinite(lp)
        before = model.forward_evals
        if log_tilt is not None:
            tilt = np.asarray(log_tilt(nodes[inside], alpha), dtype=np.float64)
        else:
            tilt = alpha * _safe_loglik(model, data, nodes[inside])
        evals = model.forward_evals - before
        logd[inside] = lp[inside] + tilt - integrated_deviance(curve, alpha)
    logd = np.where(np.isnan(logd), -np.inf, logd).reshape(shape)
    axes = tmp.axes
    prior_mass = _trapz_nd(np.exp(lp.reshape(shape)), axes)
    meta = {"box": [list(b) for b in box], "resolution": list(res), "alpha": alpha,
            "forward_evals_grid": int(evals)}
    if prior_mass < PRIOR_MASS_FLOOR:
        meta["warning"] = (f"box covers only {prior_mass:.6f} of the prior mass "
                           f"(< {PRIOR_MASS_FLOOR})")
    fld = PowerPosteriorField(box, res, float(alpha), logd, meta)
    meta["normalization"] = normalization(fld)
    return fld


def _safe_loglik(model, data, thetas):
    if model.domain is None:
        return model.log_likelihood_many(data, thetas)
    ok = np.array([bool(model.domain(t)) for t in thetas])
    out = np.full(thetas.shape[0], -np.inf)
    if ok.any():
        out[ok] = model.log_likelihood_many(data, thetas[ok])
    return out


def normalization(fld: PowerPosteriorField) -> float:
    """Trapezoid integral of the density over the box (``-inf`` nodes count as 0)."""
    return _trapz_nd(np.exp(fld.log_density), fld.axes)


def marginal(fld, axis: int) -> GriddedDensity:
    """1-D density of coordinate ``axis`` (0 or 1), integrating out the other one."""
    dens = fld.to_density() if isinstance(fld, PowerPosteriorField) else fld
    if dens.ndim != 2:
        raise ParameterError("marginal needs a 2-D field")
    if axis not in (0, 1):
        raise ParameterError("axis must be 0 or 1")
    other = 1 - axis
    vals = trapezoid(dens.values, dens.axes[other], axis=other)
    return GriddedDensity.from_values((dens.axes[axis],), np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class SIRSample:
    thetas: np.ndarray
    ess: float
    warning: Optional[str] = None


def sir_sample(ens: PriorEnsemble, alpha: float, n_out: int, stream: RandomStream) -> SIRSample:
    """Reweight the prior draws by ``p^alpha`` and resample systematically.

    No forward evaluations: the weights use the cached log-likelihoods.
    """
    _check_alpha(alpha)
    if int(n_out) != n_out or n_out < 1:
        raise ParameterError("n_out must be a positive integer")
    logw = alpha * ens.log_liks
    logw = logw - logsumexp(logw)
    w = np.exp(logw)
    ess = 1.0 / float(np.sum(w * w))
    cum = np.cumsum(w)
    cum[-1] = 1.0
    u = (stream.uniform() + np.arange(int(n_out))) / n_out
    idx = np.minimum(np.searchsorted(cum, u, side="right"), w.size - 1)
    msg = None
    if ess < ESS_FLOOR:
        msg = f"importance weights degenerate: effective sample size {ess:.3g} < {ESS_FLOOR:g}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return SIRSample(ens.thetas[idx].copy(), ess, msg)


def _interp_increasing(u, cdf, x):
    j = np.clip(np.searchsorted(cdf, u, side="left"), 1, cdf.size - 1)
    c0, c1 = cdf[j - 1], cdf[j]
    t = np.where(c1 > c0, (u - c0) / np.where(c1 > c0, c1 - c0, 1.0), 1.0)
    return x[j - 1] + t * (x[j] - x[j - 1])


def grid_inverse_cdf_sample(fld, n_out: int, stream: RandomStream) -> np.ndarray:
    """Draws from a gridded density by inverse CDF.

    1-D: inversion of the trapezoid CDF with linear interpolation between
    nodes.  2-D: a draw from the axis-0 marginal, then from the conditional
    slice interpolated linearly between the two bracketing rows.
    Returns an ``(n_out, d)`` array.
    """
    if int(n_out) != n_out or n_out < 1:
        raise ParameterError("n_out must be a positive integer")
    if isinstance(fld, PowerPosteriorField):
        axes, vals = fld.axes, np.exp(fld.log_density)
    else:
        axes, vals = fld.axes, fld.values
    if len(axes) == 1:
        return _sample_1d(axes[0], vals, stream.uniform(int(n_out)))[:, None]
    x, y = axes
    marg = trapezoid(vals, y, axis=1)
    u = stream.uniform((int(n_out), 2))
    xs = _sample_1d(x, marg, u[:, 0])
    j = np.clip(np.searchsorted(x, xs, side="right"), 1, x.size - 1)
    t = (xs - x[j - 1]) / (x[j] - x[j - 1])
    out = np.empty((int(n_out), 2))
    out[:, 0] = xs
    for i in range(int(n_out)):
        row = (1.0 - t[i]) * vals[j[i] - 1] + t[i] * vals[j[i]]
        out[i, 1] = _sample_1d(y, row, u[i:i + 1, 1])[0]
    return out


def _sample_1d(x, pdf, u):
    pdf = np.asarray(pdf, dtype=np.float64)
    cdf = cumulative_trapezoid(pdf, x, initial=0.0)
    total = cdf[-1]
    if not total > 0.0:
        raise NumericError("cannot sample a density with non-positive integral")
    return _interp_increasing(np.asarray(u) * total, cdf, x)


def perturb(f: GriddedDensity, g: GriddedDensity) -> GriddedDensity:
    """``f (+) g``: pointwise product, renormalized."""
    _same_grid(f, g)
    return GriddedDensity.from_values(f.axes, f.values * g.values)


def power(f: GriddedDensity, r: float) -> GriddedDensity:
    """``r (.) f``: pointwise ``r``-th power, renormalized."""
    if not r > 0.0:
        raise ParameterError("power r must be positive")
    return GriddedDensity.from_values(f.axes, f.values ** r)


def write_field(fld: PowerPosteriorField, csv_path, json_path=None, extra_meta=None) -> None:
    """Row-major CSV ``theta1[,theta2],log_density,density`` plus optional JSON metadata."""
    d = len(fld.box)
    header = ["theta%d" % (i + 1) for i in range(d)] + ["log_density", "density"]
    nodes = fld.nodes()
    ld = fld.log_density.ravel()
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for p, v in zip(nodes, ld):
            w.writerow(["%.17g" % x for x in p] + ["%.17g" % v, "%.17g" % math.exp(v)])
    if json_path is not None:
        meta = dict(fld.metadata)
        if extra_meta:
            meta.update(extra_meta)
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
