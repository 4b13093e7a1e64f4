"""Hot numerical kernels: numba-jitted with a pure-numpy fallback.

The backend is chosen once at import time from the environment variable
``QUADINFO_BACKEND``:

* ``auto``  (default) -- use numba when it imports, else fall back to numpy
* ``numba`` -- require numba, raise if it is unavailable
* ``numpy`` -- force the pure-numpy fallback

Both paths implement the same contracts:

* ``weighted_moments``  -- compensated one-pass sums (w, wr, wi, wr^2, wri, wi^2)
* ``histogram_counts``  -- clamped 2-D binning with per-bin compensated
  accumulation, so the result is independent of sample order / sharding
  to ~1e-15 relative
* ``entropy_nats``      -- plug-in Shannon entropy, occupied bins summed in
  ascending probability order with compensated summation

With identical inputs the two backends agree to better than 1e-13 relative
(bin indices are computed with the exact same floating-point expression, so
they match bit-for-bit; only the summation rounding differs).
"""

from __future__ import annotations

import math
import os

import numpy as np

_BACKEND_ENV = "QUADINFO_BACKEND"


def _resolve_backend() -> str:
    choice = os.environ.get(_BACKEND_ENV, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{_BACKEND_ENV} must be one of auto|numba|numpy, got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise ImportError(
                f"{_BACKEND_ENV}=numba requested but numba is not importable"
            )
        return "numpy"
    return "numba"


BACKEND = _resolve_backend()
USING_NUMBA = BACKEND == "numba"


# ----------------------------------------------------------------------
# pure-numpy implementations
# ----------------------------------------------------------------------

def _moments_numpy(r, i, w):
    # math.fsum is exact, which more than satisfies the compensated-summation
    # contract of the jitted twin.
    sw = math.fsum(w)
    swr = math.fsum(w * r)
    swi = math.fsum(w * i)
    swrr = math.fsum(w * r * r)
    swri = math.fsum(w * r * i)
    swii = math.fsum(w * i * i)
    return sw, swr, swi, swrr, swri, swii


def _histogram_numpy(r, i, w, rmin, rspan, imin, ispan, nb):
    # Identical index expression to the jitted kernel so both backends bin
    # every sample into the same cell bit-for-bit.  Huge magnitudes overflow
    # to inf and clip into the boundary bins; suppress the benign warning.
    with np.errstate(over="ignore"):
        ta = (r - rmin) / rspan * nb
        tb = (i - imin) / ispan * nb
    fa = np.floor(ta)
    fb = np.floor(tb)
    out = (fa < 0) | (fa > nb - 1) | (fb < 0) | (fb > nb - 1)
    a = np.clip(fa, 0, nb - 1).astype(np.int64)
    b = np.clip(fb, 0, nb - 1).astype(np.int64)
    # Accumulate in extended precision; x86-64 long double keeps the result
    # order-independent far below the 1e-12 contract.
    acc = np.zeros((nb, nb), dtype=np.longdouble)
    np.add.at(acc, (a, b), w.astype(np.longdouble))
    counts = acc.astype(np.float64)
    clamped = float(math.fsum(w[out])) if np.any(out) else 0.0
    return counts, clamped


def _entropy_numpy(p):
    occ = p[p > 0.0]
    if occ.size == 0:
        return 0.0
    occ = np.sort(occ)
    return -math.fsum(occ * np.log(occ))


def _third_moment_numpy(x, w):
    return math.fsum(w * x * x * x)


# ----------------------------------------------------------------------
# numba implementations (same word-for-word arithmetic where it matters)
# ----------------------------------------------------------------------

if USING_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _moments_numba(r, i, w):  # pragma: no cover - exercised via dispatch
        n = r.shape[0]
        s = np.zeros(6)
        c = np.zeros(6)
        vals = np.empty(6)
        for k in range(n):
            wk = w[k]
            rk = r[k]
            ik = i[k]
            vals[0] = wk
            vals[1] = wk * rk
            vals[2] = wk * ik
            vals[3] = wk * rk * rk
            vals[4] = wk * rk * ik
            vals[5] = wk * ik * ik
            for m in range(6):
                x = vals[m]
                t = s[m] + x
                if abs(s[m]) >= abs(x):
                    c[m] += (s[m] - t) + x
                else:
                    c[m] += (x - t) + s[m]
                s[m] = t
        return (
            s[0] + c[0],
            s[1] + c[1],
            s[2] + c[2],
            s[3] + c[3],
            s[4] + c[4],
            s[5] + c[5],
        )

    @njit(cache=True, nogil=True)
    def _histogram_numba(r, i, w, rmin, rspan, imin, ispan, nb):  # pragma: no cover
        n = r.shape[0]
        counts = np.zeros((nb, nb))
        comp = np.zeros((nb, nb))
        clamped = 0.0
        clamped_c = 0.0
        for k in range(n):
            ta = (r[k] - rmin) / rspan * nb
            tb = (i[k] - imin) / ispan * nb
            fa = math.floor(ta)
            fb = math.floor(tb)
            out = fa < 0 or fa > nb - 1 or fb < 0 or fb > nb - 1
            if fa < 0:
                fa = 0
            elif fa > nb - 1:
                fa = nb - 1
            if fb < 0:
                fb = 0
            elif fb > nb - 1:
                fb = nb - 1
            a = int(fa)
            b = int(fb)
            wk = w[k]
            # Kahan per-bin accumulation.
            y = wk - comp[a, b]
            t = counts[a, b] + y
            comp[a, b] = (t - counts[a, b]) - y
            counts[a, b] = t
            if out:
                y = wk - clamped_c
                t = clamped + y
                clamped_c = (t - clamped) - y
                clamped = t
        return counts, clamped

    @njit(cache=True, nogil=True)
    def _entropy_numba(p):  # pragma: no cover - exercised via dispatch
        nocc = 0
        for k in range(p.shape[0]):
            if p[k] > 0.0:
                nocc += 1
        if nocc == 0:
            return 0.0
        occ = np.empty(nocc)
        j = 0
        for k in range(p.shape[0]):
            if p[k] > 0.0:
                occ[j] = p[k]
                j += 1
        occ = np.sort(occ)
        s = 0.0
        c = 0.0
        for k in range(nocc):
            x = occ[k] * math.log(occ[k])
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
        return -(s + c)

    @njit(cache=True, nogil=True)
    def _third_moment_numba(x, w):  # pragma: no cover - exercised via dispatch
        s = 0.0
        c = 0.0
        for k in range(x.shape[0]):
            v = w[k] * x[k] * x[k] * x[k]
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        return s + c


# ----------------------------------------------------------------------
# dispatch table
# ----------------------------------------------------------------------

IMPLEMENTATIONS = {
    "numpy": {
        "weighted_moments": _moments_numpy,
        "histogram_counts": _histogram_numpy,
        "entropy_nats": _entropy_numpy,
        "third_moment": _third_moment_numpy,
    }
}
if USING_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "weighted_moments": _moments_numba,
        "histogram_counts": _histogram_numba,
        "entropy_nats": _entropy_numba,
        "third_moment": _third_moment_numba,
    }

_active = IMPLEMENTATIONS[BACKEND]


def weighted_moments(r, i, w):
    """Compensated sums (Sw, Swr, Swi, Swrr, Swri, Swii) over the samples."""
    r = np.ascontiguousarray(r, dtype=np.float64)
    i = np.ascontiguousarray(i, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return _active["weighted_moments"](r, i, w)


def histogram_counts(r, i, w, rmin, rspan, imin, ispan, nb):
    """Weighted 2-D counts with index clamping.

    Returns ``(counts[nb, nb], clamped_weight)`` where ``clamped_weight`` is the
    total weight of samples whose raw bin index fell outside ``[0, nb-1]`` on
    either axis before clamping.
    """
    r = np.ascontiguousarray(r, dtype=np.float64)
    i = np.ascontiguousarray(i, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return _active["histogram_counts"](
        r, i, w, float(rmin), float(rspan), float(imin), float(ispan), int(nb)
    )


def entropy_nats(p):
    """Plug-in Shannon entropy of a nonnegative vector, in nats (0 ln 0 := 0)."""
    p = np.ascontiguousarray(p, dtype=np.float64).ravel()
    return float(_active["entropy_nats"](p))


def third_moment(x, w):
    """Compensated weighted third moment  sum(w * x**3)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return float(_active["third_moment"](x, w))


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs (no-op on numpy)."""
    r = np.array([0.1, 0.6])
    i = np.array([0.2, 0.4])
    w = np.array([1.0, 2.0])
    weighted_moments(r, i, w)
    histogram_counts(r, i, w, 0.0, 1.0, 0.0, 1.0, 4)
    entropy_nats(np.array([0.5, 0.5]))
    third_moment(r, w)
