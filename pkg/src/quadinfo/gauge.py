"""Orientation gauge for quadrature clouds.

A complex field has an arbitrary global phase: multiplying every node by
``exp(i*chi)`` rotates the whole (Re, Im) sample cloud rigidly.  To compare
histograms across detuning, each cloud is rotated into a canonical frame:
the principal-axis angle of the weighted (non-centered) second moments,

    theta = 0.5 * atan2(2*<RI>_w, <R^2>_w - <I^2>_w),   theta in (-pi/2, pi/2],

and the active rotation ``R' + i I' = exp(-i*theta) * (R + i I)`` puts the
long axis of the cloud on the R' axis.  theta is defined modulo pi; the
remaining half-turn ambiguity is resolved deterministically by
:func:`canonical_align` via the sign of the weighted third moment of R', so
the full analysis chain is invariant under a global phase of the input.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from .errors import (
    EmptyCloudError,
    IsotropicCovarianceError,
    ZeroWeightError,
)

log = logging.getLogger(__name__)

# Both |2*sri| and |srr - sii| below this fraction of (srr + sii) means the
# second moments carry no orientation information.
ISOTROPY_RTOL = 1e-12

# A weighted cloud mean larger than this fraction of the RMS radius is worth
# flagging: the non-centered moments then mix mean and spread.
MEAN_WARN_FRAC = 0.01

WEIGHTINGS = ("intensity", "unit")


@dataclass(frozen=True)
class SampleCloud:
    """Quadrature samples (R, I) with nonnegative weights.

    ``points`` has shape (N, 2) with columns (R, I).  Weights are intensities
    by construction; statistics routines may override them with unit weights.
    """

    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    eps: Optional[float] = None
    mode: Optional[str] = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (N, 2)")
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must have shape (N,)")
        if pts.shape[0] < 2:
            raise ValueError("a cloud needs at least 2 samples")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        if not np.any(w > 0.0):
            raise ValueError("a cloud needs at least one positive weight")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def r(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def i(self) -> np.ndarray:
        return self.points[:, 1]

    def __len__(self):
        return self.points.shape[0]

    def with_unit_weights(self) -> "SampleCloud":
        return SampleCloud(points=self.points,
                           weights=np.ones(len(self), dtype=np.float64),
                           eps=self.eps, mode=self.mode)


def effective_weights(cloud: SampleCloud, weighting: str) -> np.ndarray:
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    if weighting == "unit":
        return np.ones(len(cloud), dtype=np.float64)
    return cloud.weights


def retain_interior(fld) -> SampleCloud:
    """Extract the retained samples of a field as a cloud.

    Keeps exactly the nodes whose weight is positive or that have a
    4-connected neighbor with positive weight, in row-major grid order.
    Raises :class:`EmptyCloudError` when nothing qualifies.
    """
    mask = fld.mask.ravel()
    if not mask.any():
        raise EmptyCloudError("no retained node: the field is identically zero")
    values = fld.values.ravel()[mask]
    weights = fld.weights.ravel()[mask]
    points = np.column_stack((values.real, values.imag))
    return SampleCloud(points=points, weights=weights, eps=fld.eps,
                       mode=fld.mode)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Weighted non-centered second moments of a cloud."""

    srr: float
    sri: float
    sii: float
    wmean: tuple  # (⟨R⟩_w, ⟨I⟩_w), diagnostic only

    def trace(self) -> float:
        return self.srr + self.sii


def weighted_covariance(cloud: SampleCloud,
                        weighting: str = "intensity") -> CovarianceMatrix:
    """Second moments <R^2>_w, <R I>_w, <I^2>_w with <f>_w = sum(w f)/sum(w).

    The moments are non-centered; the weighted mean is recorded and a warning
    is logged when its magnitude exceeds 1% of the RMS radius, since then the
    orientation mixes mean offset and spread.  ``unit`` weighting replaces all
    weights by 1.
    """
    w = effective_weights(cloud, weighting)
    sw, swr, swi, swrr, swri, swii = _accel.weighted_moments(cloud.r, cloud.i, w)
    if sw <= 0.0:
        raise ZeroWeightError("total weight is zero")
    srr = swrr / sw
    sri = swri / sw
    sii = swii / sw
    mean_r = swr / sw
    mean_i = swi / sw
    rms = math.sqrt(srr + sii)
    if rms > 0.0 and math.hypot(mean_r, mean_i) > MEAN_WARN_FRAC * rms:
        log.warning(
            "cloud mean (%.3e, %.3e) exceeds %.0f%% of RMS radius %.3e; "
            "non-centered orientation may be biased",
            mean_r, mean_i, 100.0 * MEAN_WARN_FRAC, rms,
        )
    return CovarianceMatrix(srr=srr, sri=sri, sii=sii, wmean=(mean_r, mean_i))


def orientation_angle(cov: CovarianceMatrix) -> float:
    """Principal-axis angle theta = 0.5*atan2(2 sri, srr - sii) in (-pi/2, pi/2].

    Raises :class:`IsotropicCovarianceError` when both the off-diagonal and
    the diagonal difference are below ``1e-12 * (srr + sii)`` — the cloud then
    has no preferred axis and the angle would be numerical noise.
    """
    scale = cov.srr + cov.sii
    if abs(2.0 * cov.sri) < ISOTROPY_RTOL * scale and \
            abs(cov.srr - cov.sii) < ISOTROPY_RTOL * scale:
        raise IsotropicCovarianceError(
            f"second moments are isotropic to {ISOTROPY_RTOL:g} relative "
            f"(srr={cov.srr!r}, sii={cov.sii!r}, sri={cov.sri!r})"
        )
    theta = 0.5 * math.atan2(2.0 * cov.sri, cov.srr - cov.sii)
    if theta <= -0.5 * math.pi:
        # atan2 may return exactly -pi; fold to the agreed half-open range.
        theta += math.pi
    return theta


@dataclass(frozen=True)
class GaugeFrame:
    """Gauge bookkeeping for one analysis: per-cloud and anchor angles."""

    theta: float
    theta_anchor: Optional[float] = None
    eps_star: Optional[float] = None

    def __post_init__(self):
        if not (-0.5 * math.pi < self.theta <= 0.5 * math.pi):
            raise ValueError("theta must lie in (-pi/2, pi/2]")


def align(cloud: SampleCloud, theta: float) -> SampleCloud:
    """Actively rotate the cloud:  R' + i I' = exp(-i*theta) (R + i I).

    Weights and provenance are carried over unchanged.  Any real angle is
    accepted.
    """
    ct = math.cos(theta)
    st = math.sin(theta)
    r = cloud.r
    i = cloud.i
    rp = ct * r + st * i
    ip = ct * i - st * r
    return SampleCloud(points=np.column_stack((rp, ip)),
                       weights=cloud.weights, eps=cloud.eps, mode=cloud.mode)


def half_turn_witness(cloud: SampleCloud, weighting: str = "intensity") -> float:
    """Weighted third moment of R — the sign picks the canonical half-turn."""
    w = effective_weights(cloud, weighting)
    return _accel.third_moment(cloud.r, w)


def canonical_align(cloud: SampleCloud, theta: float,
                    weighting: str = "intensity"):
    """Align by ``theta`` and resolve the mod-pi ambiguity deterministically.

    The principal angle fixes the frame only up to a half turn; binning in a
    fixed asymmetric window is not invariant under that flip, so a convention
    is needed for the full chain to be invariant under a global input phase.
    After rotating, the cloud is negated (an extra half turn, exact in
    floating point) when the weighted third moment of R' is negative.

    Returns ``(aligned_cloud, flipped)``.
    """
    aligned = align(cloud, theta)
    flipped = half_turn_witness(aligned, weighting) < 0.0
    if flipped:
        aligned = SampleCloud(points=-aligned.points, weights=aligned.weights,
                              eps=aligned.eps, mode=aligned.mode)
    return aligned, flipped


def merge_clouds(*clouds: SampleCloud) -> SampleCloud:
    """Concatenate clouds (used for the anchor dataset joining both modes)."""
    if not clouds:
        raise EmptyCloudError("nothing to merge")
    points = np.concatenate([c.points for c in clouds], axis=0)
    weights = np.concatenate([c.weights for c in clouds], axis=0)
    first = clouds[0]
    return SampleCloud(points=points, weights=weights, eps=first.eps, mode=None)
