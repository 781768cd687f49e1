"""Foundational numerics: tempering grids, Simpson quadrature, signed
log-domain reductions and the seeded random stream."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ._backend import kernels
from .errors import ParameterError

DEFAULT_SUB_POINTS = 11


@dataclass(frozen=True)
class TemperingGrid:
    """Ordered tempering points ``0 = a_0 < ... < a_K = 1``.

    ``sub_points`` is the (odd) number of Simpson nodes used inside every
    interval ``[a_{k-1}, a_k]``.
    """

    points: np.ndarray
    sub_points: int = DEFAULT_SUB_POINTS

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ParameterError("a tempering grid needs at least two points")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise ParameterError("tempering grid must start at 0 and end at 1")
        if np.any(np.diff(pts) <= 0.0):
            raise ParameterError("tempering grid must be strictly increasing")
        _check_sub_points(self.sub_points)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    @property
    def n_intervals(self) -> int:
        return self.points.size - 1

    def interval_nodes(self, k: int) -> np.ndarray:
        """Simpson nodes of interval ``k`` (1-based, matching ``[a_{k-1}, a_k]``)."""
        return np.linspace(self.points[k - 1], self.points[k], self.sub_points)


def _check_sub_points(sub_points):
    if int(sub_points) != sub_points or sub_points < 3 or sub_points % 2 == 0:
        raise ParameterError(f"sub_points must be an odd integer >= 3, got {sub_points!r}")


def make_grid(n_alpha: int, sub_points: int = DEFAULT_SUB_POINTS) -> TemperingGrid:
    """Uniform grid ``a_k = k / n_alpha``."""
    if int(n_alpha) != n_alpha or n_alpha < 1:
        raise ParameterError(f"n_alpha must be a positive integer, got {n_alpha!r}")
    _check_sub_points(sub_points)
    pts = np.arange(n_alpha + 1, dtype=np.float64) / n_alpha
    return TemperingGrid(pts, int(sub_points))


def graded_grid(n_alpha: int, exponent: float = 3.0,
                sub_points: int = DEFAULT_SUB_POINTS) -> TemperingGrid:
    """Power-law schedule ``a_k = (k / n_alpha) ** exponent``.

    Clusters points near ``a = 0``, where the tractile function of a
    concentrated likelihood varies fastest.  ``exponent = 1`` is the uniform grid.
    """
    if not exponent >= 1.0:
        raise ParameterError("exponent must be >= 1")
    base = make_grid(n_alpha, sub_points)
    return TemperingGrid(base.points ** exponent, base.sub_points)


def simpson_integrate(values: Sequence[float], step: float) -> float:
    """Composite Simpson rule over equally spaced nodes.

    Requires an odd number (>= 3) of nodes; exact for cubics.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 3 or v.size % 2 == 0:
        raise ParameterError(f"Simpson needs an odd node count >= 3, got {v.size}")
    if not step > 0.0:
        raise ParameterError("step must be positive")
    return float(step / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum()))


class SignedLogValue(NamedTuple):
    """A real number stored as ``sign * exp(log_magnitude)``."""

    sign: float
    log_magnitude: float

    @classmethod
    def from_float(cls, x: float) -> "SignedLogValue":
        if x == 0.0:
            return cls(0.0, -math.inf)
        return cls(math.copysign(1.0, x), math.log(abs(x)))

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)


ZERO = SignedLogValue(0.0, -math.inf)


def signed_lse_sum(signs, logmags) -> SignedLogValue:
    """Sum of ``signs[i] * exp(logmags[i])`` without overflow."""
    sg, lm = kernels.signed_lse(np.asarray(signs, dtype=np.float64),
                                np.asarray(logmags, dtype=np.float64))
    return SignedLogValue(float(sg), float(lm))


def signed_lse_mean(terms: Iterable[SignedLogValue]) -> SignedLogValue:
    """Arithmetic mean of signed log-domain terms, max-shifted."""
    terms = list(terms)
    if not terms:
        raise ParameterError("signed_lse_mean needs at least one term")
    arr = np.array(terms, dtype=np.float64).reshape(-1, 2)
    total = signed_lse_sum(arr[:, 0], arr[:, 1])
    if total.sign == 0:
        return ZERO
    return SignedLogValue(total.sign, total.log_magnitude - math.log(len(terms)))


@dataclass
class RandomStream:
    """Seeded random source built on the Philox4x64-10 counter-based generator.

    The 64-bit ``seed`` is the Philox key.  Substream ``i`` starts at counter
    ``(0, 0, 0, i)`` (highest counter word), so substreams never overlap and a
    substream's draws do not depend on how many other substreams are used or
    in what order they are consumed.
    """

    seed: int = 0
    substream: int = 0
    algorithm: str = field(default="philox4x64-10", init=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if not 0 <= int(self.substream) < 2**64:
            raise ParameterError("substream index must be a 64-bit unsigned integer")
        bitgen = np.random.Philox(key=int(self.seed),
                                  counter=[0, 0, 0, int(self.substream)])
        self._generator = np.random.Generator(bitgen)

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def spawn(self, index: int) -> "RandomStream":
        """Independent stream for replicate / worker ``index``.

        Children are keyed on the seed alone (substream ``index + 1``), so
        spawning from a child gives the same streams as spawning from the root.
        """
        return RandomStream(self.seed, index + 1)

    def uniform(self, size=None):
        return self._generator.random(size)

    def normal(self, size=None):
        return self._generator.standard_normal(size)
