"""Prior-stage estimation of the expected deviance along the tempering path.

All forward-model evaluations happen once, in :func:`build_ensemble`.  Every
later quantity (the tractile function ``h``, its running integral ``hbar``,
the expected deviance ``phi1 = h / (1 + hbar)``, the MGF and higher moments)
is recomputed from the cached log-likelihood values.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._backend import kernels
from .core import RandomStream, TemperingGrid, simpson_integrate
from .errors import ModelError, ParameterError, QuadratureCollapseError
from .likelihood import Dataset, LikelihoodModel

log = logging.getLogger(__name__)

CSV_HEADER = ("alpha", "h", "hbar", "phi1", "log_z")
# |1 + hbar| below this fraction of |hbar| counts as catastrophic cancellation
CANCELLATION_RATIO = 1e-6


@dataclass
class PriorEnsemble:
    """Prior draws with their cached log-likelihood values."""

    thetas: np.ndarray
    log_liks: np.ndarray
    seed: int
    forward_evals: int
    outputs: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=np.float64))
        self.log_liks = np.asarray(self.log_liks, dtype=np.float64)
        if self.log_liks.size < 2:
            raise ParameterError("an ensemble needs N >= 2 samples")
        if self.thetas.shape[0] != self.log_liks.size:
            raise ParameterError("thetas and log_liks disagree in length")

    @property
    def size(self) -> int:
        return self.log_liks.size


def build_ensemble(prior_sampler: Callable, model: LikelihoodModel, data: Dataset, n: int,
                   stream: RandomStream, keep_outputs: bool = False) -> PriorEnsemble:
    """Draw ``n`` prior samples and evaluate the forward model exactly once on each.

    ``prior_sampler(generator, n)`` must return an ``(n, d)`` array.
    """
    if int(n) != n or n < 2:
        raise ParameterError(f"ensemble size must be an integer >= 2, got {n!r}")
    thetas = np.atleast_2d(np.asarray(prior_sampler(stream.generator, int(n)), dtype=np.float64))
    if thetas.shape[0] != n:
        thetas = thetas.reshape(int(n), -1)
    before = model.forward_evals
    ll, outputs = model.log_likelihood_many(data, thetas, return_outputs=True)
    evals = model.forward_evals - before
    bad = np.flatnonzero(~np.isfinite(ll))
    if bad.size:
        i = int(bad[0])
        raise ModelError(f"non-finite log-likelihood {ll[i]!r} at prior sample {i} "
                         f"(theta={thetas[i].tolist()})")
    return PriorEnsemble(thetas, ll, stream.seed, evals, outputs if keep_outputs else None)


class EnsembleTractile:
    """Monte Carlo estimators over an ensemble, all in the log domain."""

    def __init__(self, log_liks):
        self.log_liks = np.asarray(log_liks, dtype=np.float64)
        self._log_n = math.log(self.log_liks.size)

    def signed_log_moment(self, alphas, power: int):
        """``(sign, log|.|)`` of ``(1/N) sum exp(a*l_n) l_n**power`` for each a."""
        signs, logs = kernels.tilted_lse(self.log_liks, np.atleast_1d(alphas), int(power))
        return signs, logs - self._log_n

    def signed_log_h(self, alphas):
        return self.signed_log_moment(alphas, 1)

    def h(self, alphas) -> np.ndarray:
        signs, logs = self.signed_log_h(alphas)
        with np.errstate(over="ignore"):
            return signs * np.exp(logs)

    def log_evidence(self, alphas) -> np.ndarray:
        """``log((1/N) sum exp(a*l_n))``."""
        return self.signed_log_moment(alphas, 0)[1]


def as_source(obj):
    if isinstance(obj, PriorEnsemble):
        return EnsembleTractile(obj.log_liks)
    if hasattr(obj, "h") and hasattr(obj, "log_evidence"):
        return obj
    raise ParameterError(f"cannot use {type(obj).__name__} as a tractile source")


def _signed_log_h(source, alphas):
    if hasattr(source, "signed_log_h"):
        return source.signed_log_h(alphas)
    h = np.atleast_1d(np.asarray(source.h(alphas), dtype=np.float64))
    with np.errstate(divide="ignore"):
        return np.sign(h), np.log(np.abs(h))


def tractile_h(ens: PriorEnsemble, alpha: float) -> float:
    """Prior-expectation estimate of ``E[p^alpha log p]``."""
    return float(EnsembleTractile(ens.log_liks).h([alpha])[0])


@dataclass
class DevianceCurve:
    """Gridpoint values of ``h``, ``hbar``, ``phi1`` and the direct ``log_z``."""

    grid: TemperingGrid
    h: np.ndarray
    hbar: np.ndarray
    phi1: np.ndarray
    log_z: np.ndarray
    guarded: np.ndarray
    source: object = field(default=None, repr=False, compare=False)

    @property
    def alphas(self) -> np.ndarray:
        return self.grid.points

    def log_evidence(self) -> np.ndarray:
        """``int_0^a phi1`` at every gridpoint, i.e. ``log(1 + hbar)``.

        Gridpoints under the cancellation guard use ``log_z`` instead.
        """
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log1p(self.hbar)
        return np.where(self.guarded, self.log_z, out)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in zip(self.alphas, self.h, self.hbar, self.phi1, self.log_z):
                w.writerow([_fmt(x) for x in row])

    @classmethod
    def from_csv(cls, path, sub_points: int = 11) -> "DevianceCurve":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != CSV_HEADER:
            raise ParameterError(f"unexpected header {rows[0]!r}")
        arr = np.array([[float(x) for x in r] for r in rows[1:]])
        grid = TemperingGrid(arr[:, 0], sub_points)
        one_plus = 1.0 + arr[:, 2]
        guarded = _cancelled(one_plus, arr[:, 2])
        return cls(grid, arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], guarded)


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _cancelled(one_plus, hbar):
    return ~np.isfinite(one_plus) | (np.abs(one_plus) < CANCELLATION_RATIO * np.abs(hbar))


def deviance_curve(source, grid: TemperingGrid, log_domain_fallback: bool = False) -> DevianceCurve:
    """Expected deviance on ``grid`` from a prior ensemble or an analytic tractile.

    ``hbar`` is accumulated interval by interval with composite Simpson on
    ``grid.sub_points`` nodes; ``h`` at those nodes is recomputed from the
    source (no forward evaluations).

    If ``1 + hbar`` turns non-positive the quadrature has failed to resolve
    the decay of the evidence.  By default this raises
    QuadratureCollapseError; with ``log_domain_fallback`` the failing
    gridpoint and every later one use ``h / exp(log_z)`` instead.
    """
    src = as_source(source)
    pts = grid.points
    m = grid.sub_points
    nodes = np.concatenate([grid.interval_nodes(k) for k in range(1, len(pts))])
    with np.errstate(over="ignore", invalid="ignore"):
        h_nodes = np.asarray(src.h(nodes), dtype=np.float64).reshape(len(pts) - 1, m)
    h = np.empty(len(pts))
    h[0] = float(np.asarray(src.h(np.array([0.0])))[0])
    h[1:] = h_nodes[:, -1]
    hbar = np.zeros(len(pts))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, len(pts)):
            step = (pts[k] - pts[k - 1]) / (m - 1)
            hbar[k] = hbar[k - 1] + simpson_integrate(h_nodes[k - 1], step)
    log_z = np.asarray(src.log_evidence(pts), dtype=np.float64)
    one_plus = 1.0 + hbar
    guarded = _cancelled(one_plus, hbar)
    collapsed = ~guarded & (one_plus <= 0.0)
    if collapsed.any() and log_domain_fallback:
        k = int(np.flatnonzero(collapsed)[0])
        log.warning("1 + hbar <= 0 at alpha=%.6g; log-domain evidence used from there on", pts[k])
        guarded[k:] = True
    elif collapsed.any():
        k = int(np.flatnonzero(collapsed)[0])
        raise QuadratureCollapseError(
            f"1 + hbar = {one_plus[k]:.3e} <= 0 at alpha = {pts[k]:.6g}; use a finer "
            "tempering grid or more sub_points, or pass log_domain_fallback=True to switch to "
            "the log-domain evidence")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        phi1 = h / one_plus
    if guarded.any():
        idx = np.flatnonzero(guarded)
        sg, lh = _signed_log_h(src, pts[idx])
        phi1[idx] = sg * np.exp(lh - log_z[idx])
        log.info("cancellation guard active at %d gridpoint(s), first alpha=%.6g; "
                 "phi1 taken as h / exp(log_z)", idx.size, pts[idx[0]])
    return DevianceCurve(grid, h, hbar, phi1, log_z, guarded, src)


def _locate(curve: DevianceCurve, alpha: float):
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha!r}")
    pts = curve.alphas
    k = int(np.searchsorted(pts, alpha, side="left"))
    if k < pts.size and pts[k] == alpha:
        return k, True
    return k - 1, False


def _hbar_at(curve: DevianceCurve, k: int, alpha: float) -> float:
    nodes = np.linspace(curve.alphas[k], alpha, curve.grid.sub_points)
    step = (alpha - curve.alphas[k]) / (curve.grid.sub_points - 1)
    with np.errstate(over="ignore", invalid="ignore"):
        return curve.hbar[k] + simpson_integrate(curve.source.h(nodes), step)


def integrated_deviance(curve: DevianceCurve, alpha: float) -> float:
    """``int_0^alpha phi1(tau) dtau``.

    Because ``phi1 = hbar' / (1 + hbar)``, the integral equals
    ``log(1 + hbar(alpha))``; off-grid ``hbar`` is extended from the nearest
    lower gridpoint with the same Simpson rule.
    """
    k, on_grid = _locate(curve, alpha)
    if on_grid:
        return float(curve.log_evidence()[k])
    if curve.source is None:
        return float(PchipInterpolator(curve.alphas, curve.log_evidence())(alpha))
    if curve.guarded[k]:
        return float(curve.source.log_evidence(np.array([alpha]))[0])
    hb = _hbar_at(curve, k, alpha)
    if _cancelled(np.array([1.0 + hb]), np.array([hb]))[0]:
        return float(curve.source.log_evidence(np.array([alpha]))[0])
    if 1.0 + hb <= 0.0:
        raise QuadratureCollapseError(f"1 + hbar <= 0 at alpha = {alpha:.6g}")
    return math.log1p(hb)


def expected_deviance(curve: DevianceCurve, alpha: float, method: Optional[str] = None) -> float:
    """Expected deviance ``phi1(alpha)``.

    Gridpoints return the stored value.  Off-grid, ``method="tractile"``
    (default when the curve still holds its source) evaluates
    ``h(alpha) / (1 + hbar(alpha))`` from the cached log-likelihoods, and
    ``method="pchip"`` interpolates the gridpoint values monotonically.
    """
    k, on_grid = _locate(curve, alpha)
    if on_grid:
        return float(curve.phi1[k])
    if method is None:
        method = "pchip" if curve.source is None else "tractile"
    if method == "pchip":
        return float(PchipInterpolator(curve.alphas, curve.phi1)(alpha))
    if method != "tractile":
        raise ParameterError(f"unknown method {method!r}")
    if curve.source is None:
        raise ParameterError("tractile evaluation needs the curve's source")
    hb = _hbar_at(curve, k, alpha)
    if curve.guarded[k] or _cancelled(np.array([1.0 + hb]), np.array([hb]))[0]:
        sg, lh = _signed_log_h(curve.source, np.array([alpha]))
        return float(sg[0] * math.exp(lh[0] - curve.source.log_evidence(np.array([alpha]))[0]))
    return float(curve.source.h(np.array([alpha]))[0] / (1.0 + hb))


def mgf(curve: DevianceCurve, alpha: float, beta: float, ens: Optional[PriorEnsemble] = None) -> float:
    """Moment generating function of the log-likelihood under the power posterior.

    ``m(alpha, beta) = E[p^(alpha+beta)] exp(-int_0^alpha phi1)``, the prior
    expectation taken from ``ens`` (or the curve's own source).
    """
    if not 0.0 <= beta <= 1.0:
        raise ParameterError(f"beta must lie in [0, 1], got {beta!r}")
    src = as_source(ens) if ens is not None else curve.source
    if src is None:
        raise ParameterError("mgf needs an ensemble or a curve that kept its source")
    log_e = float(src.log_evidence(np.array([alpha + beta]))[0])
    return math.exp(log_e - integrated_deviance(curve, alpha))


def moment_phi_n(ens: PriorEnsemble, alpha: float, n: int,
                 curve: Optional[DevianceCurve] = None) -> float:
    """``E_alpha[log^n p]`` by the self-normalized prior estimator.

    With ``curve`` the normalizer is ``exp(int_0^alpha phi1)`` from the
    quadrature instead of the direct ensemble estimate.
    """
    if int(n) != n or n < 0:
        raise ParameterError("moment order must be a non-negative integer")
    if n == 0:
        return 1.0
    src = EnsembleTractile(ens.log_liks)
    sg, lm = src.signed_log_moment(np.array([alpha]), int(n))
    if sg[0] == 0.0:
        return 0.0
    log_norm = (integrated_deviance(curve, alpha) if curve is not None
                else src.log_evidence(np.array([alpha]))[0])
    return float(sg[0] * math.exp(lm[0] - log_norm))


def bernoulli_residual(curve: DevianceCurve) -> np.ndarray:
    """``|phi1' - (h'/h) phi1 + phi1^2|`` at interior gridpoints (central differences).

    Entries are NaN where ``h`` vanishes.  Diagnostic only.
    """
    x, f, h = curve.alphas, curve.phi1, curve.h
    if x.size < 3:
        return np.empty(0)
    h1 = x[1:-1] - x[:-2]
    h2 = x[2:] - x[1:-1]
    cm = -h2 / (h1 * (h1 + h2))
    c0 = (h2 - h1) / (h1 * h2)
    cp = h1 / (h2 * (h1 + h2))
    df = cm * f[:-2] + c0 * f[1:-1] + cp * f[2:]
    dh = cm * h[:-2] + c0 * h[1:-1] + cp * h[2:]
    hk = h[1:-1]
    fk = f[1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        res = np.abs(df - dh / hk * fk + fk * fk)
    return np.where(hk == 0.0, np.nan, res)


def moment_recursion_residual(ens: PriorEnsemble, alpha: float, n: int, step: float) -> float:
    """``|(phi_n(a+d) - phi_n(a-d)) / 2d - (phi_{n+1}(a) - phi_1(a) phi_n(a))|``.

    The moments obey ``phi_n' = phi_{n+1} - phi_1 phi_n``; for the
    self-normalized estimator this holds exactly, so the residual measures the
    central-difference error alone.
    """
    if not step > 0.0:
        raise ParameterError("step must be positive")
    lhs = (moment_phi_n(ens, alpha + step, n) - moment_phi_n(ens, alpha - step, n)) / (2.0 * step)
    rhs = moment_phi_n(ens, alpha, n + 1) - moment_phi_n(ens, alpha, 1) * moment_phi_n(ens, alpha, n)
    return abs(lhs - rhs)
