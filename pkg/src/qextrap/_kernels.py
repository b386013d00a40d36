"""Hot loops with a numba path and a plain numpy path.

The numba path is used unless ``QEXTRAP_JIT`` is set to ``0``. Both paths
return identical arrays up to floating point rounding.
"""

from __future__ import annotations

import os

import numpy as np

JIT_ENABLED = os.environ.get("QEXTRAP_JIT", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    from numba import njit
except ImportError:  # pragma: no cover
    JIT_ENABLED = False


def _identity_decorator(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


if not JIT_ENABLED:
    njit = _identity_decorator  # noqa: F811


# ---------------------------------------------------------------- timelines


def timeline_numpy(evals: np.ndarray, weights: np.ndarray, times: np.ndarray, sigma: float) -> np.ndarray:
    """Return ``out[t, c] = Re sum_kl weights[c,k,l] exp(-i (E_k - E_l) t) g_kl``.

    ``g_kl = exp(-(E_k - E_l)^2 sigma^2 / 2)`` is the Gaussian jitter factor.
    """
    omega = np.subtract.outer(evals, evals)
    damp = np.exp(-0.5 * (omega * sigma) ** 2)
    out = np.empty((times.shape[0], weights.shape[0]))
    for i, t in enumerate(times):
        ph = np.exp(-1j * omega * t) * damp
        out[i] = np.einsum("ckl,kl->c", weights, ph).real
    return out


@njit(cache=True)
def _timeline_jit(evals, weights, times, sigma):
    nt = times.shape[0]
    nc = weights.shape[0]
    d = evals.shape[0]
    out = np.zeros((nt, nc))
    # diagonal terms are time independent; off-diagonal pairs share one phase
    for k in range(d):
        for c in range(nc):
            v = weights[c, k, k].real
            for i in range(nt):
                out[i, c] += v
    for k in range(d):
        for l in range(k + 1, d):
            w = evals[k] - evals[l]
            g = np.exp(-0.5 * (w * sigma) ** 2)
            for i in range(nt):
                cw = np.cos(w * times[i]) * g
                sw = np.sin(w * times[i]) * g
                for c in range(nc):
                    z = weights[c, k, l]
                    y = weights[c, l, k]
                    # Re(z e^{-iwt}) + Re(y e^{iwt})
                    out[i, c] += (z.real + y.real) * cw + (z.imag - y.imag) * sw
    return out


def timeline(evals: np.ndarray, weights: np.ndarray, times: np.ndarray, sigma: float = 0.0) -> np.ndarray:
    evals = np.ascontiguousarray(evals, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.complex128)
    times = np.ascontiguousarray(times, dtype=np.float64)
    if JIT_ENABLED:
        return _timeline_jit(evals, weights, times, float(sigma))
    return timeline_numpy(evals, weights, times, float(sigma))


# ------------------------------------------------- rank-one functionals


def rank_one_numpy(psi: np.ndarray) -> np.ndarray:
    """Coefficients of ``<psi|X|psi>`` on the upper-triangle entries of the
    real 2d x 2d block that backs a Hermitian d x d variable X.

    Entry ``(i, j)`` with ``i <= j`` sits at ``j (j + 1) / 2 + i``.
    """
    d = psi.shape[0]
    # <psi|X|psi> = tr(C X) with C = |psi><psi|
    c = np.outer(psi, psi.conj())
    emb = np.block([[c.real, -c.imag], [c.imag, c.real]])
    n = 2 * d
    iu, ju = np.triu_indices(n)
    order = np.argsort(ju * (ju + 1) // 2 + iu)
    iu, ju = iu[order], ju[order]
    vals = emb[iu, ju].copy()
    vals[iu == ju] *= 0.5
    return vals


@njit(cache=True)
def _rank_one_jit(psi):
    d = psi.shape[0]
    n = 2 * d
    out = np.empty(n * (n + 1) // 2)
    for j in range(n):
        for i in range(j + 1):
            # C_ab = psi_a conj(psi_b), embedding blocks [[Re, -Im], [Im, Re]]
            a = i % d
            b = j % d
            z = psi[a] * np.conj(psi[b])
            if (i < d) == (j < d):
                v = z.real
            elif i < d:
                v = -z.imag
            else:
                v = z.imag
            if i == j:
                v *= 0.5
            out[j * (j + 1) // 2 + i] = v
    return out


def rank_one(psi: np.ndarray) -> np.ndarray:
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    if JIT_ENABLED:
        return _rank_one_jit(psi)
    return rank_one_numpy(psi)
