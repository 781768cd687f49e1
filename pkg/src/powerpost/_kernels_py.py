"""Pure numpy implementations of the hot kernels.

Mirrors the compiled ``_kernels`` extension function for function; used when
the extension is unavailable or ``POWERPOST_PURE=1`` is set.
"""
import numpy as np


def signed_lse(signs, logmag):
    """Signed log-sum-exp of ``sum_i signs[i] * exp(logmag[i])``.

    Returns ``(sign, log|sum|)``; ``(0.0, -inf)`` when the sum is exactly zero.
    """
    signs = np.asarray(signs, dtype=np.float64)
    logmag = np.asarray(logmag, dtype=np.float64)
    live = (signs != 0.0) & (logmag > -np.inf)
    if not live.any():
        return 0.0, -np.inf
    shift = logmag[live].max()
    total = np.sum(signs[live] * np.exp(logmag[live] - shift))
    if total == 0.0:
        return 0.0, -np.inf
    return float(np.sign(total)), float(shift + np.log(abs(total)))


def tilted_lse(ell, alphas, power):
    """For every ``a`` in ``alphas``: signed LSE of ``exp(a*ell) * ell**power``.

    Returns two arrays ``(signs, logmags)`` of the same length as ``alphas``.
    """
    ell = np.asarray(ell, dtype=np.float64)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    if power == 0:
        term_sign = np.ones_like(ell)
        log_abs = np.zeros_like(ell)
    else:
        term_sign = np.sign(ell) ** power
        with np.errstate(divide="ignore"):
            log_abs = power * np.log(np.abs(ell))
    signs = np.empty(alphas.size)
    logmags = np.empty(alphas.size)
    for k, a in enumerate(alphas):
        signs[k], logmags[k] = signed_lse(term_sign, a * ell + log_abs)
    return signs, logmags


def w2_batch(t, cum_p, cum_q):
    """Squared 2-Wasserstein distance between discrete measures on support ``t``.

    ``cum_p`` and ``cum_q`` have shape (n, T) and hold cumulative masses of n
    pairs of measures, each ending at 1.  Quantile functions are matched
    exactly over the merged set of cumulative breakpoints.
    """
    t = np.asarray(t, dtype=np.float64)
    cum_p = np.atleast_2d(np.asarray(cum_p, dtype=np.float64))
    cum_q = np.atleast_2d(np.asarray(cum_q, dtype=np.float64))
    last = t.size - 1
    out = np.empty(cum_p.shape[0])
    for r in range(cum_p.shape[0]):
        qs = np.sort(np.concatenate((cum_p[r], cum_q[r])))
        ip = np.minimum(np.searchsorted(cum_p[r], qs, side="left"), last)
        iq = np.minimum(np.searchsorted(cum_q[r], qs, side="left"), last)
        dq = np.diff(qs, prepend=0.0)
        out[r] = np.sum(dq * (t[ip] - t[iq]) ** 2)
    return out


def mixture_loglik(points, data, sigma2):
    """log((1/K) sum_k N(y_k; x, sigma2 I_2)) for each row x of ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    k = data.shape[0]
    const = -np.log(k) - np.log(2.0 * np.pi * sigma2)
    out = np.empty(points.shape[0])
    chunk = max(1, 2_000_000 // max(k, 1))
    for start in range(0, points.shape[0], chunk):
        p = points[start:start + chunk]
        d2 = ((p[:, None, :] - data[None, :, :]) ** 2).sum(axis=2)
        e = -0.5 * d2 / sigma2
        m = e.max(axis=1)
        out[start:start + chunk] = m + np.log(np.exp(e - m[:, None]).sum(axis=1))
    return out + const
