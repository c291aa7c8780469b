"""Hot loops, compiled with numba when available.

Set ``WEYLPERSIST_NUMBA=0`` in the environment to force the pure-numpy
fallbacks (useful for debugging and for the backend benchmark).  Every public
function here dispatches on :data:`USE_NUMBA` at call time, so the flag can
also be flipped programmatically with :func:`set_backend`.
"""
import math
import os

import numpy as np
from scipy.special import gammaln

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("WEYLPERSIST_NUMBA", "1").lower() not in (
    "0",
    "false",
    "no",
    "off",
)

# Basis entries below this (rows have unit norm) never influence a sign.
SUPPORT_CUTOFF = 1e-20
_EPS_STOP = 1e-17


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend name."""
    global USE_NUMBA
    previous = backend()
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        USE_NUMBA = True
    elif name == "numpy":
        USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def backend():
    return "numba" if USE_NUMBA else "numpy"


def _njit(fn=None, **opts):
    if fn is None:
        return lambda f: _njit(f, **opts)
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True, **opts)(fn)


# ---------------------------------------------------------------------------
# log sum_{i<=n} z^i / i!   (peak-centred ratio recurrence)
# ---------------------------------------------------------------------------


def _log_partial_exp_py(n, z):
    if z == 0.0 or n == 0:
        return 0.0
    k = min(n, int(math.floor(z)))
    log_peak = k * math.log(z) - math.lgamma(k + 1.0)
    rest = 0.0
    t = 1.0
    for i in range(k, n):
        t *= z / (i + 1.0)
        rest += t
        if t < _EPS_STOP * (1.0 + rest):
            break
    t = 1.0
    for i in range(k, 0, -1):
        t *= i / z
        rest += t
        if t < _EPS_STOP * (1.0 + rest):
            break
    return log_peak + math.log1p(rest)


_log_partial_exp_nb = _njit(_log_partial_exp_py)


def _elementwise(scalar):
    def many(n, z):
        out = np.empty(z.shape[0])
        for j in range(z.shape[0]):
            out[j] = scalar(n, z[j])
        return out

    return many


_log_partial_exp_many_nb = _njit(_elementwise(_log_partial_exp_nb))


def _log_partial_exp_many_np(n, z):
    """Vectorized window sum around the peak term; used without numba."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    live = (z > 0) & (n > 0)
    if not live.any():
        return out
    zl = z[live]
    k = np.minimum(n, np.floor(zl)).astype(np.int64)
    width = int(np.ceil(9.5 * np.sqrt(zl.max()))) + 25
    offs = np.arange(-width, width + 1)
    idx = k[:, None] + offs[None, :]
    valid = (idx >= 0) & (idx <= n)
    idx_c = np.clip(idx, 0, n)
    logz = np.log(zl)[:, None]
    rel = (idx_c - k[:, None]) * logz - (gammaln(idx_c + 1.0) - gammaln(k[:, None] + 1.0))
    terms = np.where(valid, np.exp(rel), 0.0)
    terms[:, width] = 0.0
    rest = terms.sum(axis=1)
    out[live] = k * np.log(zl) - gammaln(k + 1.0) + np.log1p(rest)
    return out


def log_partial_exp(n, z):
    """Scalar ``log sum_{i=0}^{n} z**i / i!`` for ``z >= 0``."""
    if USE_NUMBA:
        return float(_log_partial_exp_nb(int(n), float(z)))
    return _log_partial_exp_py(int(n), float(z))


def log_partial_exp_many(n, z):
    z = np.ascontiguousarray(z, dtype=float)
    shape = z.shape
    flat = z.ravel()
    if USE_NUMBA:
        res = _log_partial_exp_many_nb(int(n), flat)
    else:
        res = _log_partial_exp_many_np(int(n), flat)
    return res.reshape(shape)


# ---------------------------------------------------------------------------
# log of e^a * sum_{i<=n} (-a)^i / i!  for even n, via the positive series
#   1 + sum_{k>=0} a^{n+1+k} / (n! k! (n+1+k))
# ---------------------------------------------------------------------------


def _log_ell_even_py(n, a):
    if a == 0.0:
        return 0.0
    la = math.log(a)
    base = math.lgamma(n + 1.0)

    # l_k is concave in k: climb to the maximum from a good starting point.
    k = max(0, int(math.floor(a)) - 1)
    lk = (n + 1.0 + k) * la - base - math.lgamma(k + 1.0) - math.log(n + 1.0 + k)
    while True:
        moved = False
        if k > 0:
            lm = (n + k) * la - base - math.lgamma(k * 1.0) - math.log(n + 0.0 + k)
            if lm > lk:
                k -= 1
                lk = lm
                moved = True
                continue
        lp = (n + 2.0 + k) * la - base - math.lgamma(k + 2.0) - math.log(n + 2.0 + k)
        if lp > lk:
            k += 1
            lk = lp
            moved = True
        if not moved:
            break

    s = 1.0
    t = 1.0
    j = k
    while True:
        # ratio term_{j+1}/term_j
        t *= a / (j + 1.0) * (n + 1.0 + j) / (n + 2.0 + j)
        s += t
        j += 1
        if t < _EPS_STOP * s:
            break
    t = 1.0
    j = k
    while j > 0:
        t *= j / a * (n + 1.0 + j) / (n + 0.0 + j)
        s += t
        j -= 1
        if t < _EPS_STOP * s:
            break
    big = lk + math.log(s)
    if big > 0.0:
        return big + math.log1p(math.exp(-big))
    return math.log1p(math.exp(big))


_log_ell_even_nb = _njit(_log_ell_even_py)


_log_ell_even_many_nb = _njit(_elementwise(_log_ell_even_nb))


def _log_ell_even_many_np(n, a):
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    live = a > 0
    if not live.any():
        return out
    al = a[live]
    kmax = int(np.ceil(al.max() + 12.0 * np.sqrt(al.max()) + 40))
    ks = np.arange(kmax + 1, dtype=float)
    la = np.log(al)[:, None]
    lt = (n + 1.0 + ks) * la - gammaln(n + 1.0) - gammaln(ks + 1.0) - np.log(n + 1.0 + ks)
    top = lt.max(axis=1)
    big = top + np.log(np.exp(lt - top[:, None]).sum(axis=1))
    out[live] = np.logaddexp(0.0, big)
    return out


def log_ell_even(n, a):
    if USE_NUMBA:
        return float(_log_ell_even_nb(int(n), float(a)))
    return _log_ell_even_py(int(n), float(a))


def log_ell_even_many(n, a):
    a = np.ascontiguousarray(a, dtype=float)
    shape = a.shape
    flat = a.ravel()
    if USE_NUMBA:
        res = _log_ell_even_many_nb(int(n), flat)
    else:
        res = _log_ell_even_many_np(int(n), flat)
    return res.reshape(shape)


# ---------------------------------------------------------------------------
# survival counting
# ---------------------------------------------------------------------------


def _basis_support(basis):
    """Per-row [lo, hi) column range holding every entry above the cutoff."""
    mask = np.abs(basis) > SUPPORT_CUTOFF
    any_ = mask.any(axis=1)
    lo = np.where(any_, mask.argmax(axis=1), 0)
    hi = np.where(any_, basis.shape[1] - mask[:, ::-1].argmax(axis=1), 0)
    return lo.astype(np.int64), hi.astype(np.int64)


_TRIAL_BLOCK = 64


def _count_linear_py(coeffs, basis, lo, hi, early_abort):
    # Trials go in blocks so each basis row is reused from cache by the whole block.
    trials = coeffs.shape[0]
    npts = basis.shape[0]
    idx = np.empty(_TRIAL_BLOCK, dtype=np.int64)
    ok = np.empty(_TRIAL_BLOCK, dtype=np.bool_)
    count = 0
    for start in range(0, trials, _TRIAL_BLOCK):
        m = 0
        for t in range(start, min(start + _TRIAL_BLOCK, trials)):
            idx[m] = t
            ok[m] = True
            m += 1
        for p in range(npts):
            if m == 0:
                break
            keep = 0
            row = basis[p, lo[p] : hi[p]]
            for k in range(m):
                t = idx[k]
                c = coeffs[t, lo[p] : hi[p]]
                acc = 0.0
                for i in range(row.shape[0]):
                    acc += c[i] * row[i]
                good = ok[k] and acc > 0.0
                if good or not early_abort:
                    idx[keep] = t
                    ok[keep] = good
                    keep += 1
            m = keep
        for k in range(m):
            if ok[k]:
                count += 1
    return count


# fastmath lets the dot products vectorize; BLAS reassociates them too.
_count_linear_nb = _njit(_count_linear_py, fastmath=True)

_BLOCK = 32


def _count_linear_np(coeffs, basis, lo, hi, early_abort):
    trials = coeffs.shape[0]
    npts = basis.shape[0]
    if not early_abort:
        values = coeffs @ basis.T
        return int(np.count_nonzero((values > 0).all(axis=1)))
    alive = np.arange(trials)
    for start in range(0, npts, _BLOCK):
        stop = min(start + _BLOCK, npts)
        c_lo = int(lo[start:stop].min())
        c_hi = int(hi[start:stop].max())
        if c_hi <= c_lo:
            return 0
        vals = coeffs[alive, c_lo:c_hi] @ basis[start:stop, c_lo:c_hi].T
        alive = alive[(vals > 0).all(axis=1)]
        if alive.size == 0:
            return 0
    return int(alive.size)


def count_linear_survivors(coeffs, basis, early_abort=True, support=None):
    """Count rows ``c`` of ``coeffs`` with ``basis @ c > 0`` at every point."""
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    basis = np.ascontiguousarray(basis, dtype=float)
    lo, hi = support if support is not None else _basis_support(basis)
    if USE_NUMBA:
        return int(_count_linear_nb(coeffs, basis, lo, hi, bool(early_abort)))
    return _count_linear_np(coeffs, basis, lo, hi, bool(early_abort))


def _count_cholesky_py(z, chol, early_abort):
    trials, npts = z.shape
    idx = np.empty(_TRIAL_BLOCK, dtype=np.int64)
    ok = np.empty(_TRIAL_BLOCK, dtype=np.bool_)
    count = 0
    for start in range(0, trials, _TRIAL_BLOCK):
        m = 0
        for t in range(start, min(start + _TRIAL_BLOCK, trials)):
            idx[m] = t
            ok[m] = True
            m += 1
        for j in range(npts):
            if m == 0:
                break
            keep = 0
            row = chol[j, : j + 1]
            for k in range(m):
                t = idx[k]
                zt = z[t, : j + 1]
                acc = 0.0
                for i in range(j + 1):
                    acc += row[i] * zt[i]
                good = ok[k] and acc > 0.0
                if good or not early_abort:
                    idx[keep] = t
                    ok[keep] = good
                    keep += 1
            m = keep
        for k in range(m):
            if ok[k]:
                count += 1
    return count


_count_cholesky_nb = _njit(_count_cholesky_py, fastmath=True)


def _count_cholesky_np(z, chol, early_abort):
    trials, npts = z.shape
    if not early_abort:
        values = z @ chol.T
        return int(np.count_nonzero((values > 0).all(axis=1)))
    alive = np.arange(trials)
    for start in range(0, npts, _BLOCK):
        stop = min(start + _BLOCK, npts)
        vals = z[alive, :stop] @ chol[start:stop, :stop].T
        alive = alive[(vals > 0).all(axis=1)]
        if alive.size == 0:
            return 0
    return int(alive.size)


def count_cholesky_survivors(z, chol, early_abort=True):
    """Count rows of ``z`` whose sequentially generated path stays positive."""
    z = np.ascontiguousarray(z, dtype=float)
    chol = np.ascontiguousarray(chol, dtype=float)
    if USE_NUMBA:
        return int(_count_cholesky_nb(z, chol, bool(early_abort)))
    return _count_cholesky_np(z, chol, bool(early_abort))
