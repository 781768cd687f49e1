"""Quadratic distances and the exponential-family likelihood evaluator.

A model's log-likelihood is ``log_c - s * dis(Y, g(theta))`` where ``dis`` sums a
per-block distance over the blocks of the dataset (receivers, observations).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._backend import kernels
from .errors import DomainError, NumericError, ParameterError

W2_EPS = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Observed data as a tuple of equal-length real vectors (one per block).

    ``support`` optionally holds the common abscissa of every block (for
    instance sample times), needed by transport distances.
    """

    values: tuple
    support: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        blocks = tuple(np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in self.values)
        if not blocks:
            raise ParameterError("dataset is empty")
        lengths = {b.size for b in blocks}
        if len(lengths) != 1 or 0 in lengths:
            raise ParameterError("all data blocks must be non-empty and share one length")
        object.__setattr__(self, "values", blocks)
        if self.support is not None:
            sup = np.asarray(self.support, dtype=np.float64)
            if sup.shape != blocks[0].shape:
                raise ParameterError("support length does not match the blocks")
            object.__setattr__(self, "support", sup)

    @property
    def n_blocks(self) -> int:
        return len(self.values)

    @property
    def block_length(self) -> int:
        return self.values[0].size

    def as_array(self) -> np.ndarray:
        """Blocks stacked as an (n_blocks, block_length) array."""
        return np.vstack(self.values)


def sq_euclidean(u, v) -> float:
    """Squared Euclidean distance ``sum (u_i - v_i)**2``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ParameterError(f"length mismatch: {u.shape} vs {v.shape}")
    d = u - v
    return float(np.dot(d.ravel(), d.ravel()))


def _signal_cdfs(u: np.ndarray, v: np.ndarray, eps: float):
    """Common-shift normalization of signal pairs (rows) into cumulative masses."""
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise NumericError("Wasserstein distance got non-finite signal values")
    shift = np.minimum(u.min(axis=1), v.min(axis=1))[:, None]
    pu = u - shift
    pv = v - shift
    mass_u = pu.sum(axis=1)
    mass_v = pv.sum(axis=1)
    bad = np.flatnonzero((mass_u <= 0.0) | (mass_v <= 0.0))
    if bad.size:
        raise NumericError(
            "zero total mass after the common shift (constant signal at the shared "
            f"minimum) in pair {int(bad[0])}; the signal cannot be read as a measure")
    pu += eps
    pv += eps
    cu = np.cumsum(pu, axis=1) / (mass_u + eps * u.shape[1])[:, None]
    cv = np.cumsum(pv, axis=1) / (mass_v + eps * v.shape[1])[:, None]
    return cu, cv


def wasserstein2_1d(u, v, support=None, eps: float = W2_EPS) -> float:
    """Squared 2-Wasserstein distance between two signals on a common grid.

    Both signals are shifted by the same constant (their joint minimum), an
    ``eps`` floor is added to every bin and each is scaled to unit mass; the
    distance is then computed by exact matching of the two discrete quantile
    functions.  ``support`` defaults to ``0, 1, ..., n-1``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if u.shape != v.shape or u.ndim != 1:
        raise ParameterError(f"signals must be 1-D and of equal length: {u.shape} vs {v.shape}")
    return float(wasserstein2_many(v, u[None, :], support, eps)[0])


def wasserstein2_many(block, signals, support=None, eps: float = W2_EPS) -> np.ndarray:
    """``wasserstein2_1d(signals[n], block)`` for every row of ``signals``."""
    block = np.asarray(block, dtype=np.float64)
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    if signals.shape[1] != block.size:
        raise ParameterError("signal length does not match the data block")
    t = np.arange(block.size, dtype=np.float64) if support is None else np.asarray(support, float)
    cu, cv = _signal_cdfs(signals, np.broadcast_to(block, signals.shape), eps)
    return kernels.w2_batch(t, cu, cv)


class Euclidean:
    """Sum of squared differences; induced by the Euclidean inner product."""

    name = "euclidean"
    has_inner_product = True

    def __call__(self, u, v, support=None):
        return sq_euclidean(u, v)

    def many(self, block, outputs, support=None):
        d = np.atleast_2d(outputs) - np.asarray(block)[None, :]
        return np.einsum("ij,ij->i", d, d)

    @staticmethod
    def inner(u, v):
        return float(np.dot(np.ravel(u), np.ravel(v)))


class Wasserstein:
    """Squared 2-Wasserstein distance between signals (see ``wasserstein2_1d``)."""

    name = "wasserstein"
    has_inner_product = False

    def __init__(self, eps: float = W2_EPS):
        self.eps = eps

    def __call__(self, u, v, support=None):
        return wasserstein2_1d(u, v, support, self.eps)

    def many(self, block, outputs, support=None):
        return wasserstein2_many(block, outputs, support, self.eps)


DISTANCES = {"euclidean": Euclidean, "wasserstein": Wasserstein}


class LikelihoodModel:
    """Exponential likelihood ``p(Y|theta) = C exp(-s dis(Y, g(theta)))``.

    Parameters
    ----------
    forward : callable
        Maps one parameter vector to the model output, an array of shape
        ``(n_blocks, block_length)`` aligned with the dataset blocks.
    distance : str or distance object
        ``"euclidean"`` or ``"wasserstein"``, or any object with ``__call__``
        and ``many`` methods.
    dispersion : float
        The factor ``s > 0``.
    log_c : float
        ``log C``; the constant itself is never formed.
    batch_forward : callable, optional
        Vectorized forward map, ``(N, d) -> (N, n_blocks, block_length)``.
    domain : callable, optional
        Returns False for parameters outside the forward model's domain.

    Every forward evaluation increments ``forward_evals``.
    """

    def __init__(self, forward: Callable, distance="euclidean", dispersion: float = 1.0,
                 log_c: float = 0.0, batch_forward: Optional[Callable] = None,
                 domain: Optional[Callable] = None):
        if not dispersion > 0.0:
            raise ParameterError("dispersion s must be positive")
        self._forward = forward
        self._batch_forward = batch_forward
        self.distance = DISTANCES[distance]() if isinstance(distance, str) else distance
        self.dispersion = float(dispersion)
        self.log_c = float(log_c)
        self.domain = domain
        self.forward_evals = 0

    # forward map ---------------------------------------------------------
    def _check_domain(self, theta):
        if self.domain is not None and not self.domain(theta):
            raise DomainError(f"parameter {np.asarray(theta).tolist()} outside the model domain")

    def predict(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        self._check_domain(theta)
        self.forward_evals += 1
        return np.atleast_2d(np.asarray(self._forward(theta), dtype=np.float64))

    def predict_many(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        if self.domain is not None:
            for th in thetas:
                self._check_domain(th)
        if self._batch_forward is None:
            out = np.stack([np.atleast_2d(np.asarray(self._forward(th), float)) for th in thetas])
        else:
            out = np.asarray(self._batch_forward(thetas), dtype=np.float64)
        self.forward_evals += thetas.shape[0]
        return out

    # likelihood ------------------------------------------------------------
    def discrepancy(self, data: Dataset, output) -> float:
        """``dis(Y, g)`` summed over blocks."""
        output = np.atleast_2d(output)
        if output.shape != (data.n_blocks, data.block_length):
            raise ParameterError(f"output shape {output.shape} does not match the data")
        return float(sum(self.distance(y, g, data.support) for y, g in zip(data.values, output)))

    def discrepancy_many(self, data: Dataset, outputs) -> np.ndarray:
        outputs = np.asarray(outputs, dtype=np.float64)
        if outputs.shape[1:] != (data.n_blocks, data.block_length):
            raise ParameterError(f"output shape {outputs.shape[1:]} does not match the data")
        total = np.zeros(outputs.shape[0])
        for b, y in enumerate(data.values):
            total += self.distance.many(y, outputs[:, b, :], data.support)
        return total

    def log_likelihood_from_discrepancy(self, thetas, dis):
        """Combine discrepancies with the dispersion; subclasses may use ``thetas``."""
        return self.log_c - self.dispersion * np.asarray(dis, dtype=np.float64)

    def log_likelihood(self, data: Dataset, theta) -> float:
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        dis = self.discrepancy(data, self.predict(theta))
        return float(self.log_likelihood_from_discrepancy(theta[None, :], np.array([dis]))[0])

    def log_likelihood_many(self, data: Dataset, thetas, return_outputs: bool = False):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        outputs = self.predict_many(thetas)
        ll = self.log_likelihood_from_discrepancy(thetas, self.discrepancy_many(data, outputs))
        return (ll, outputs) if return_outputs else ll


def log_likelihood(model: LikelihoodModel, data: Dataset, theta) -> float:
    """``log_c - s * dis(Y, g(theta))`` for a single parameter vector."""
    return model.log_likelihood(data, theta)


def stack_outputs(outputs: Sequence[np.ndarray]) -> np.ndarray:
    return np.stack([np.atleast_2d(o) for o in outputs])
