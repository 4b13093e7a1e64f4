"""Plug-in entropy and mutual information of binned quadrature data.

All quantities are in nats with the convention 0*ln(0) = 0 and are plain
plug-in estimators — no bias correction of any kind.  Occupied bins are
summed in ascending probability order with compensated summation, so results
are reproducible to the last few ulps regardless of bin layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _accel
from .errors import NotNormalizedError
from .quad_hist import QuadratureHistogram, marginals

NORMALIZATION_ATOL = 1e-9


def entropy(p) -> float:
    """Shannon entropy -sum(p ln p) of a probability vector, in nats.

    The input must be entrywise nonnegative and sum to 1 within 1e-9
    (:class:`NotNormalizedError` otherwise).
    """
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size == 0:
        raise NotNormalizedError("empty vector is not a distribution")
    if np.any(p < 0.0):
        raise NotNormalizedError("negative entries are not probabilities")
    total = float(p.sum())
    if abs(total - 1.0) > NORMALIZATION_ATOL:
        raise NotNormalizedError(
            f"probabilities sum to {total!r}, expected 1 within "
            f"{NORMALIZATION_ATOL:g}"
        )
    return _accel.entropy_nats(p)


def joint_entropy(hist: QuadratureHistogram) -> float:
    """Entropy of the joint bin distribution of a histogram."""
    return _accel.entropy_nats(hist.probs)


@dataclass(frozen=True)
class InfoMeasures:
    """Entropies and mutual information of one analyzed cloud.

    ``mi_over_hri`` is 0 with ``degenerate=True`` when the joint entropy
    vanishes (all mass in a single bin).
    """

    h_r: float
    h_i: float
    h_ri: float
    mi: float
    mi_over_hri: float
    degenerate: bool = False
    eps: Optional[float] = None
    mode: Optional[str] = None
    nb: Optional[int] = None
    weighting: Optional[str] = None


def mutual_information(hist: QuadratureHistogram, eps: Optional[float] = None,
                       mode: Optional[str] = None,
                       weighting: Optional[str] = None) -> InfoMeasures:
    """Marginal/joint entropies and their mutual information for a histogram.

    MI is stored exactly as the definitional combination
    ``H_R + H_I - H_RI``; tiny negative values (rounding) are possible and
    deliberately not clipped.
    """
    marg = marginals(hist)
    h_r = _accel.entropy_nats(marg.p_r)
    h_i = _accel.entropy_nats(marg.p_i)
    h_ri = joint_entropy(hist)
    mi = h_r + h_i - h_ri
    if h_ri == 0.0:
        ratio = 0.0
        degenerate = True
    else:
        ratio = mi / h_ri
        degenerate = False
    return InfoMeasures(h_r=h_r, h_i=h_i, h_ri=h_ri, mi=mi,
                        mi_over_hri=ratio, degenerate=degenerate,
                        eps=eps, mode=mode, nb=hist.nb, weighting=weighting)
