"""Windowed 2-D quadrature histograms.

One rectangular window is fixed for a whole sweep (anchored at the avoided
crossing) so that bin probabilities stay comparable across detuning.  Bin
indices follow

    a = floor((r - rmin) / (rmax - rmin) * nb),  clamped to [0, nb-1]

which is total for every finite input; the clamped weight fraction is kept as
a diagnostic.  Accumulation is compensated, so counts are independent of
sample order (and of any sharding of the sample set) to far better than the
1e-12 contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from .errors import DegenerateWindowError, EmptyCloudError, ZeroWeightError
from .gauge import SampleCloud, align, effective_weights

DEFAULT_Q_LO = 0.005
DEFAULT_Q_HI = 0.995
DEFAULT_PADDING = 0.05
DEFAULT_NB = 500

# Deterministic stride subsampling keeps the window pass cheap on huge clouds.
MAX_WINDOW_SAMPLES = 100_000


@dataclass(frozen=True)
class Window:
    """Fixed rectangular histogram window plus the quantile recipe behind it."""

    rmin: float
    rmax: float
    imin: float
    imax: float
    quantile_lo: float = DEFAULT_Q_LO
    quantile_hi: float = DEFAULT_Q_HI
    padding_frac: float = DEFAULT_PADDING

    def __post_init__(self):
        if not (self.rmax > self.rmin and self.imax > self.imin):
            raise DegenerateWindowError(
                f"window has nonpositive extent: "
                f"[{self.rmin}, {self.rmax}] x [{self.imin}, {self.imax}]"
            )

    @property
    def rspan(self) -> float:
        return self.rmax - self.rmin

    @property
    def ispan(self) -> float:
        return self.imax - self.imin


def _weighted_quantile(values: np.ndarray, weights: np.ndarray,
                       q: float) -> float:
    """Smallest value whose cumulative weight reaches q * total."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    total = cw[-1]
    if total <= 0.0:
        raise ZeroWeightError("cannot take weighted quantiles of zero mass")
    idx = int(np.searchsorted(cw, q * total, side="left"))
    return float(v[min(idx, v.size - 1)])


def global_window(anchor_cloud: SampleCloud, theta_anchor: float,
                  q_lo: float = DEFAULT_Q_LO, q_hi: float = DEFAULT_Q_HI,
                  padding_frac: float = DEFAULT_PADDING,
                  weighting: str = "intensity") -> Window:
    """Anchored global window from weighted quantiles of the rotated cloud.

    A deterministic stride subsample (every k-th retained sample, with k
    chosen so at most 100,000 survive) is rotated by ``theta_anchor``; per
    axis the [q_lo, q_hi] weighted quantiles are padded outward by
    ``padding_frac`` of their span.  A zero span on either axis raises
    :class:`DegenerateWindowError`.
    """
    if len(anchor_cloud) == 0:
        raise EmptyCloudError("anchor cloud is empty")
    if not (0.0 <= q_lo < q_hi <= 1.0):
        raise ValueError("need 0 <= q_lo < q_hi <= 1")
    if padding_frac < 0.0:
        raise ValueError("padding_frac must be nonnegative")
    stride = max(1, math.ceil(len(anchor_cloud) / MAX_WINDOW_SAMPLES))
    sub = SampleCloud(points=anchor_cloud.points[::stride],
                      weights=anchor_cloud.weights[::stride],
                      eps=anchor_cloud.eps, mode=anchor_cloud.mode)
    rotated = align(sub, theta_anchor)
    w = effective_weights(rotated, weighting)
    lo_r = _weighted_quantile(rotated.r, w, q_lo)
    hi_r = _weighted_quantile(rotated.r, w, q_hi)
    lo_i = _weighted_quantile(rotated.i, w, q_lo)
    hi_i = _weighted_quantile(rotated.i, w, q_hi)
    span_r = hi_r - lo_r
    span_i = hi_i - lo_i
    if span_r <= 0.0 or span_i <= 0.0:
        raise DegenerateWindowError(
            f"quantile span collapsed: R [{lo_r}, {hi_r}], I [{lo_i}, {hi_i}]"
        )
    return Window(
        rmin=lo_r - padding_frac * span_r,
        rmax=hi_r + padding_frac * span_r,
        imin=lo_i - padding_frac * span_i,
        imax=hi_i + padding_frac * span_i,
        quantile_lo=q_lo,
        quantile_hi=q_hi,
        padding_frac=padding_frac,
    )


def bin_index(r, i, window: Window, nb: int):
    """Clamped bin indices for scalar or array input.

    Total for all finite inputs, including values far outside the window and
    exact window endpoints (the top edge clamps into the last bin).
    """
    if nb < 2:
        raise ValueError("need at least 2 bins per axis")
    r = np.asarray(r, dtype=np.float64)
    i = np.asarray(i, dtype=np.float64)
    # Near-overflow magnitudes turn the scaled offset into inf; the clip
    # still lands them in the boundary bin, so the overflow is benign.
    with np.errstate(over="ignore"):
        ta = (r - window.rmin) / window.rspan * nb
        tb = (i - window.imin) / window.ispan * nb
    a = np.clip(np.floor(ta), 0, nb - 1).astype(np.int64)
    b = np.clip(np.floor(tb), 0, nb - 1).astype(np.int64)
    if a.ndim == 0:
        return int(a), int(b)
    return a, b


@dataclass(frozen=True)
class QuadratureHistogram:
    """Normalized weighted 2-D histogram over a fixed window.

    ``counts[a, b]``: a is the R-bin, b the I-bin.  ``probs = counts/total``.
    ``clamped_frac`` is the fraction of total weight whose raw bin index was
    clamped into the boundary bins.
    """

    nb: int
    counts: np.ndarray = field(repr=False)
    total: float = 0.0
    probs: np.ndarray = field(repr=False, default=None)
    window: Optional[Window] = None
    clamped_frac: float = 0.0


def histogram(cloud: SampleCloud, window: Window, nb: int = DEFAULT_NB,
              weighting: str = "intensity") -> QuadratureHistogram:
    """Accumulate the weighted joint histogram of a cloud.

    Compensated per-bin accumulation makes the counts independent of sample
    order; the normalization uses the column-wise total so the probabilities
    sum to 1 within a few ulps.
    """
    if nb < 2:
        raise ValueError("need at least 2 bins per axis")
    w = effective_weights(cloud, weighting)
    total_in = float(w.sum())
    if total_in <= 0.0:
        raise ZeroWeightError("cloud has zero total weight under this weighting")
    counts, clamped = _accel.histogram_counts(
        cloud.r, cloud.i, w,
        window.rmin, window.rspan, window.imin, window.ispan, nb,
    )
    total = float(counts.sum())
    probs = counts / total
    return QuadratureHistogram(
        nb=nb, counts=counts, total=total, probs=probs, window=window,
        clamped_frac=clamped / total if total > 0.0 else 0.0,
    )


@dataclass(frozen=True)
class MarginalPair:
    """Row/column sums of the joint probabilities."""

    p_r: np.ndarray = field(repr=False)
    p_i: np.ndarray = field(repr=False)


def marginals(hist: QuadratureHistogram) -> MarginalPair:
    """p_R(a) = sum_b p[a, b] and p_I(b) = sum_a p[a, b]."""
    return MarginalPair(p_r=hist.probs.sum(axis=1),
                        p_i=hist.probs.sum(axis=0))
