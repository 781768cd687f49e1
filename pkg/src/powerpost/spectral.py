"""Spectral view of the expected deviance through the residual kernel.

For an inner-product distance the expected log-likelihood is
``log C - s * L1(alpha)``, where ``L1`` is the trace of the residual kernel
``K(theta, eta) = <Y - g(theta), Y - g(eta)>`` under the power posterior.
Assuming a vanishing third central moment closes the trace dynamics into

    L1' = 2 s (L1^2 - L2),    L2' = 2 s L1 (L1^2 - L2),

which conserves ``c = L2 - L1^2 / 2`` and reduces to the Riccati equation
``L1' = s (L1^2 - 2c)``.  Initial traces come from a Nystrom estimate on the
prior ensemble, so no forward evaluation happens after the prior stage.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .core import TemperingGrid
from .errors import FiniteEscapeError, NumericError, ParameterError
from .likelihood import Dataset

ESCAPE_BOUND = 1e15
RK4_STEPS = 100
CSV_HEADER = ("alpha", "L1", "L2", "phi1_spectral")
# |L1_0 / k - 1| below this is treated as the stationary point
_STATIONARY_TOL = 1e-12


@dataclass(frozen=True)
class KernelTraceState:
    """Initial kernel traces with the dispersion and normalizing constant."""

    s: float
    log_C: float
    L1_0: float
    L2_0: float
    L3_0: float = 0.0
    c: float = field(init=False)

    def __post_init__(self):
        if not self.s > 0.0:
            raise ParameterError("dispersion s must be positive")
        if self.L1_0 < 0.0 or self.L2_0 < 0.0 or self.L3_0 < 0.0:
            raise ParameterError("traces of a PSD kernel are non-negative")
        if self.L2_0 > self.L1_0 ** 2 * (1.0 + 1e-12):
            raise ParameterError("L2_0 exceeds L1_0**2, impossible for non-negative eigenvalues")
        object.__setattr__(self, "c", self.L2_0 - 0.5 * self.L1_0 ** 2)


def _residuals(data: Dataset, outputs) -> np.ndarray:
    y = data.as_array()
    g = np.asarray(outputs, dtype=np.float64)
    if g.shape[-2:] != y.shape:
        raise ParameterError(f"output shape {g.shape[-2:]} does not match the data {y.shape}")
    return (y - g).reshape(*g.shape[:-2], -1)


def kernel_eval(data: Dataset, g_theta, g_eta) -> float:
    """``<Y - g_theta, Y - g_eta>`` in the Euclidean inner product."""
    r1 = _residuals(data, np.atleast_2d(g_theta))
    r2 = _residuals(data, np.atleast_2d(g_eta))
    return float(np.dot(r1, r2))


def kernel_matrix(data: Dataset, outputs) -> np.ndarray:
    """``K[i, j] = <Y - g_i, Y - g_j>`` for stacked outputs ``(N, n_blocks, L)``."""
    r = _residuals(data, outputs)
    return r @ r.T


def _check_inner_product(model):
    if model is not None and not getattr(model.distance, "has_inner_product", False):
        raise ParameterError(f"the {model.distance.name} distance is not induced by an inner product")


def nystrom_traces(ens, model, data: Dataset):
    """``(L1_0, L2_0, L3_0)`` from the eigenvalues of ``K / N`` on the prior ensemble.

    The nonzero spectrum of ``R R^T / N`` (``R`` the ``N x q`` residual
    matrix) equals that of ``R^T R / N``; the smaller of the two is
    diagonalized.  Negative roundoff eigenvalues are clamped to zero.
    """
    _check_inner_product(model)
    if ens.outputs is None:
        raise ParameterError("ensemble was built without cached outputs (keep_outputs=True)")
    r = _residuals(data, ens.outputs)
    n = r.shape[0]
    gram = (r @ r.T) if n <= r.shape[1] else (r.T @ r)
    try:
        lam = np.linalg.eigvalsh(gram / n)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigen-solver failed: {exc}") from exc
    lam = np.clip(lam, 0.0, None)
    return float(lam.sum()), float(np.sum(lam ** 2)), float(np.sum(lam ** 3))


def state_from_ensemble(ens, model, data: Dataset) -> KernelTraceState:
    L1, L2, L3 = nystrom_traces(ens, model, data)
    # guard against eigenvalue roundoff pushing L2 a hair above L1^2
    return KernelTraceState(model.dispersion, model.log_c, L1, min(L2, L1 * L1), L3)


def _rhs(s, L1, L2):
    gap = L1 * L1 - L2
    return 2.0 * s * gap, 2.0 * s * L1 * gap


def trace_ode_integrate(state: KernelTraceState, grid: TemperingGrid):
    """Classical RK4 on the coupled trace system, ``RK4_STEPS`` steps per interval.

    Returns ``(L1, L2)`` at the gridpoints.
    """
    pts = np.asarray(grid.points if isinstance(grid, TemperingGrid) else grid, dtype=np.float64)
    s = state.s
    L1 = np.empty(pts.size)
    L2 = np.empty(pts.size)
    a, b = state.L1_0, state.L2_0
    L1[0], L2[0] = a, b
    for k in range(1, pts.size):
        dt = (pts[k] - pts[k - 1]) / RK4_STEPS
        t = pts[k - 1]
        for _ in range(RK4_STEPS):
            k1a, k1b = _rhs(s, a, b)
            k2a, k2b = _rhs(s, a + 0.5 * dt * k1a, b + 0.5 * dt * k1b)
            k3a, k3b = _rhs(s, a + 0.5 * dt * k2a, b + 0.5 * dt * k2b)
            k4a, k4b = _rhs(s, a + dt * k3a, b + dt * k3b)
            a += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            b += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            t += dt
            if not (abs(a) <= ESCAPE_BOUND and math.isfinite(b)):
                raise FiniteEscapeError(f"trace L1 escaped past {ESCAPE_BOUND:g} near alpha={t:.6g}",
                                        alpha=t)
        L1[k], L2[k] = a, b
    return L1, L2


def escape_alpha(state: KernelTraceState) -> float:
    """Tempering value where the closed-form ``L1`` has a pole (``inf`` if none)."""
    s, c, x0 = state.s, state.c, state.L1_0
    if c < 0.0:
        k = math.sqrt(-2.0 * c)
        return (0.5 * math.pi - math.atan(x0 / k)) / (s * k)
    if c == 0.0:
        rate = s * x0   # may underflow to 0 for subnormal L1_0
        return math.inf if rate <= 0.0 else 1.0 / rate
    k = math.sqrt(2.0 * c)
    u0 = x0 / k
    if u0 > 1.0 and abs(u0 - 1.0) > _STATIONARY_TOL:
        return math.atanh(1.0 / u0) / (s * k)
    return math.inf


def trace_closed_form(state: KernelTraceState, alpha) -> np.ndarray:
    """Exact ``L1(alpha)`` of ``L1' = s (L1^2 - 2c)``, branch chosen by the sign of ``c``.

    * ``c < 0``: tangent branch.
    * ``c > 0``: ``tanh`` if ``|L1_0| < sqrt(2c)``, ``coth`` if above, constant at equality.
    * ``c = 0``: rational branch ``L1_0 / (1 - s L1_0 alpha)``.

    Raises FiniteEscapeError if a pole lies in ``[0, alpha]``.
    """
    a = np.asarray(alpha, dtype=np.float64)
    amax = float(np.max(a)) if a.size else 0.0
    esc = escape_alpha(state)
    if amax >= esc:
        raise FiniteEscapeError(f"closed-form L1 has a pole at alpha={esc:.6g}", alpha=esc)
    s, c, x0 = state.s, state.c, state.L1_0
    if c < 0.0:
        k = math.sqrt(-2.0 * c)
        out = k * np.tan(s * k * a + math.atan(x0 / k))
    elif c == 0.0:
        out = x0 / (1.0 - s * x0 * a)
    else:
        k = math.sqrt(2.0 * c)
        u0 = x0 / k
        if abs(u0 - 1.0) <= _STATIONARY_TOL:
            out = np.full_like(a, x0)
        elif abs(u0) < 1.0:
            out = -k * np.tanh(s * k * a - math.atanh(u0))
        else:
            # coth(z - acoth(u0)) written via 1/tanh; acoth(u0) = atanh(1/u0)
            out = -k / np.tanh(s * k * a - math.atanh(1.0 / u0))
    out = np.asarray(out, dtype=np.float64)
    if np.any(np.abs(out) > ESCAPE_BOUND):
        raise FiniteEscapeError(f"closed-form L1 exceeds {ESCAPE_BOUND:g}", alpha=amax)
    return out


def closed_form_L2(state: KernelTraceState, alpha) -> np.ndarray:
    """``L2 = c + L1^2 / 2`` along the closed-form trajectory."""
    L1 = trace_closed_form(state, alpha)
    return state.c + 0.5 * L1 * L1


def spectral_deviance(state: KernelTraceState, alpha) -> np.ndarray:
    """``log C - s L1(alpha)``."""
    return state.log_C - state.s * trace_closed_form(state, alpha)


def skewness_gap(L1, L2, L3):
    """``|L3 - 3 L2 L1 + 2 L1^3|``; zero when the null-skewness closure holds."""
    L1 = np.asarray(L1, dtype=np.float64)
    out = np.abs(np.asarray(L3, dtype=np.float64) - 3.0 * np.asarray(L2, dtype=np.float64) * L1
                 + 2.0 * L1 ** 3)
    return float(out) if out.ndim == 0 else out


def write_csv(path, state: KernelTraceState, alphas) -> None:
    a = np.asarray(alphas, dtype=np.float64)
    L1 = trace_closed_form(state, a)
    L2 = state.c + 0.5 * L1 * L1
    phi = state.log_C - state.s * L1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(a, L1, L2, phi):
            w.writerow(["%.17g" % x for x in row])
