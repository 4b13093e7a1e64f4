"""End-to-end detuning sweep: calibrate once, analyze every (eps, mode).

Stages
------
1. Field source: either synthesized from a detuning model (both eigenmode
   fields at each eps) or ingested from a directory of field files.
2. Anchor calibration at the grid eps nearest ``eps_star``: the union of both
   modes' retained clouds fixes the anchor orientation angle and the global
   histogram window used at every eps.
3. Per-(eps, mode) analysis: retain -> orient -> align -> bin -> entropies.
   With ``gauge_mode='per-eps'`` each cloud gets its own principal angle
   (isotropic clouds fall back to the nearest previously processed eps of the
   same mode); with ``'anchor'`` every cloud is rotated by the anchor angle.
4. Robustness: the sweep is rerun over bin counts and weightings and the MI
   peak location/prominence compared across variants.

Analyses at different (eps, mode) are independent and may run on a thread
pool; records are assembled in (eps, mode) order and the isotropic fallback
is resolved in a deterministic sequential pass afterwards, so results are
byte-identical for any worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .coupled_mode import DetuningModel, locate_ac
from .errors import (
    ConfigError,
    EmptyCloudError,
    IsotropicCovarianceError,
    QuadinfoError,
    RunFailedError,
)
from .field_synth import BasisModeSpec, ComplexField, GridSpec, synth_sweep
from .gauge import (
    SampleCloud,
    align,
    canonical_align,
    merge_clouds,
    orientation_angle,
    retain_interior,
    weighted_covariance,
)
from .infotheory import InfoMeasures, mutual_information
from .quad_hist import (
    DEFAULT_NB,
    DEFAULT_PADDING,
    DEFAULT_Q_HI,
    DEFAULT_Q_LO,
    Window,
    global_window,
    histogram,
)

log = logging.getLogger(__name__)

GAUGE_MODES = ("per-eps", "anchor")
MODE1 = "mode1"
MODE2 = "mode2"

# Fraction of (eps, mode) analyses that may fail before the run aborts.
FAILURE_BUDGET = 0.10

SCATTER_MAX_POINTS = 5000


@dataclass(frozen=True)
class RunConfig:
    """Everything one sweep needs; exactly reproducible from its key set."""

    model: Optional[DetuningModel] = None
    fields_dir: Optional[Path] = None
    nx: int = 256
    ny: int = 256
    basis1: Optional[BasisModeSpec] = None
    basis2: Optional[BasisModeSpec] = None
    eps_star: Optional[float] = None
    nb: int = DEFAULT_NB
    weighting: str = "intensity"
    q_lo: float = DEFAULT_Q_LO
    q_hi: float = DEFAULT_Q_HI
    padding_frac: float = DEFAULT_PADDING
    gauge_mode: str = "per-eps"
    robust_nb: tuple = (300, 500, 700)
    robust_weighting: tuple = ("intensity", "unit")
    workers: int = 1
    emit_scatter: bool = False
    seed: Optional[int] = None  # reserved; the pipeline is deterministic

    def __post_init__(self):
        if self.gauge_mode not in GAUGE_MODES:
            raise ConfigError(f"gauge mode must be one of {GAUGE_MODES}")
        if self.weighting not in ("intensity", "unit"):
            raise ConfigError("weighting must be 'intensity' or 'unit'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.model is None and self.fields_dir is None:
            raise ConfigError("need either a detuning model or a field directory")


@dataclass(frozen=True)
class SweepRecord:
    """One analyzed (eps, mode) point."""

    eps: float
    mode: str
    theta: float
    lam: Optional[complex]
    measures: InfoMeasures
    clamped_pct: float
    isotropic_fallback: bool = False


@dataclass(frozen=True)
class SweepResult:
    """All records of one sweep plus the calibration that produced them."""

    records: tuple
    failures: tuple  # (eps, mode, message)
    eps_values: np.ndarray = field(repr=False)
    eps_star: float = 0.0
    anchor_eps: float = 0.0
    theta_anchor: float = 0.0
    anchor_flipped: bool = False
    window: Optional[Window] = None
    config: Optional[RunConfig] = None
    scatter: Optional[dict] = None

    def records_for(self, mode: str):
        return [r for r in self.records if r.mode == mode]

    def modes(self):
        return sorted({r.mode for r in self.records})


@dataclass(frozen=True)
class AnalysisOutcome:
    theta_used: float
    measures: InfoMeasures
    clamped_pct: float
    isotropic_fallback: bool
    aligned: Optional[SampleCloud] = None


# ----------------------------------------------------------------------
# field sources
# ----------------------------------------------------------------------

class _SynthSource:
    """Fields synthesized from the detuning model, grouped per eps."""

    def __init__(self, config: RunConfig):
        if config.basis1 is None or config.basis2 is None:
            raise ConfigError("synthetic runs need both basis mode specs")
        self.trace, fields = synth_sweep(
            config.model, config.basis1, config.basis2,
            nx=config.nx, ny=config.ny,
        )
        self.eps_values = np.asarray(config.model.eps_grid, dtype=np.float64)
        self._groups = {}
        for fld in fields:
            self._groups.setdefault(fld.eps, []).append((fld.mode, fld))

    def group(self, eps: float):
        return sorted(self._groups[eps], key=lambda mf: mf[0])

    def default_eps_star(self) -> float:
        return locate_ac(self.trace)


class _DirectorySource:
    """Fields ingested from *.qfld files, grouped by their header eps."""

    def __init__(self, config: RunConfig):
        from .fieldfile import read_field_file

        paths = sorted(Path(config.fields_dir).glob("*.qfld"))
        if not paths:
            raise ConfigError(f"no .qfld files in {config.fields_dir}")
        self._groups = {}
        for p in paths:
            fld = read_field_file(p)
            if fld.eps is None:
                raise ConfigError(f"{p} carries no eps header")
            mode = fld.mode if fld.mode is not None else p.stem
            fld = replace(fld, mode=mode)
            self._groups.setdefault(fld.eps, []).append((mode, fld))
        self.eps_values = np.array(sorted(self._groups), dtype=np.float64)

    def group(self, eps: float):
        return sorted(self._groups[eps], key=lambda mf: mf[0])

    def default_eps_star(self) -> float:
        raise ConfigError(
            "eps_star must be given explicitly when ingesting external fields"
        )


def _make_source(config: RunConfig):
    if config.fields_dir is not None:
        return _DirectorySource(config)
    return _SynthSource(config)


# ----------------------------------------------------------------------
# calibration
# ----------------------------------------------------------------------

def _anchor_union_cloud(fields, weighting: str) -> SampleCloud:
    clouds = [retain_interior(fld) for _, fld in fields]
    if not clouds:
        raise EmptyCloudError("no field at the anchor eps")
    return merge_clouds(*clouds)


def _window_from_aligned(aligned: SampleCloud, q_lo, q_hi, padding_frac,
                         weighting) -> Window:
    # The identity rotation keeps the quantile code path shared with
    # global_window, so both gauge variants bin identically.
    return global_window(aligned, 0.0, q_lo=q_lo, q_hi=q_hi,
                         padding_frac=padding_frac, weighting=weighting)


def _anchor_frame(fields, q_lo, q_hi, padding_frac, weighting):
    """(theta_anchor, flipped, window) from the union of the anchor fields.

    An isotropic union cloud is fatal — no window can be built — and the
    IsotropicCovarianceError propagates to the caller.
    """
    union = _anchor_union_cloud(fields, weighting)
    cov = weighted_covariance(union, weighting)
    theta_anchor = orientation_angle(cov)
    aligned, flipped = canonical_align(union, theta_anchor, weighting)
    window = _window_from_aligned(aligned, q_lo, q_hi, padding_frac, weighting)
    return theta_anchor, flipped, window


def anchor_calibration(fields, q_lo: float = DEFAULT_Q_LO,
                       q_hi: float = DEFAULT_Q_HI,
                       padding_frac: float = DEFAULT_PADDING,
                       weighting: str = "intensity"):
    """Anchor angle and global window from the fields at the anchor eps.

    ``fields`` is an iterable of (mode, ComplexField) pairs (or plain fields)
    taken at the grid eps nearest eps_star.  Returns ``(theta_anchor,
    window)`` with the principal-range angle.
    """
    normalized = []
    for item in fields:
        if isinstance(item, ComplexField):
            normalized.append((item.mode, item))
        else:
            normalized.append(item)
    theta_anchor, _, window = _anchor_frame(
        normalized, q_lo, q_hi, padding_frac, weighting
    )
    return theta_anchor, window


# ----------------------------------------------------------------------
# per-point analysis
# ----------------------------------------------------------------------

def _scatter_subsample(aligned: SampleCloud) -> np.ndarray:
    stride = max(1, math.ceil(len(aligned) / SCATTER_MAX_POINTS))
    pts = aligned.points[::stride]
    w = aligned.weights[::stride]
    return np.column_stack((pts, w))


def analyze_field(fld: ComplexField, window: Window, nb: int = DEFAULT_NB,
                  weighting: str = "intensity", gauge_mode: str = "per-eps",
                  theta_anchor: Optional[float] = None,
                  anchor_flipped: bool = False,
                  fallback_theta: Optional[float] = None,
                  keep_aligned: bool = False) -> AnalysisOutcome:
    """Analyze a single field against a fixed window.

    ``per-eps`` derives the orientation angle from the field's own cloud; an
    isotropic cloud uses ``fallback_theta`` when given (flagged in the
    outcome) and otherwise propagates the error.  ``anchor`` rotates by
    ``theta_anchor`` (with the anchor frame's half-turn state) and never
    consults the cloud's own moments.
    """
    if gauge_mode not in GAUGE_MODES:
        raise ValueError(f"gauge mode must be one of {GAUGE_MODES}")
    cloud = retain_interior(fld)
    iso_fallback = False
    if gauge_mode == "anchor":
        if theta_anchor is None:
            raise ValueError("anchor gauge mode needs theta_anchor")
        theta_used = theta_anchor
        aligned = align(cloud, theta_used)
        if anchor_flipped:
            aligned = SampleCloud(points=-aligned.points,
                                  weights=aligned.weights,
                                  eps=aligned.eps, mode=aligned.mode)
    else:
        cov = weighted_covariance(cloud, weighting)
        try:
            theta_used = orientation_angle(cov)
        except IsotropicCovarianceError:
            if fallback_theta is None:
                raise
            theta_used = fallback_theta
            iso_fallback = True
        aligned, _ = canonical_align(cloud, theta_used, weighting)
    hist = histogram(aligned, window, nb=nb, weighting=weighting)
    measures = mutual_information(hist, eps=fld.eps, mode=fld.mode,
                                  weighting=weighting)
    return AnalysisOutcome(
        theta_used=theta_used,
        measures=measures,
        clamped_pct=100.0 * hist.clamped_frac,
        isotropic_fallback=iso_fallback,
        aligned=aligned if keep_aligned else None,
    )


# ----------------------------------------------------------------------
# sweep driver
# ----------------------------------------------------------------------

def _resolve_eps_star(config: RunConfig, source) -> float:
    eps_star = config.eps_star
    if eps_star is None:
        eps_star = source.default_eps_star()
    lo = float(source.eps_values[0])
    hi = float(source.eps_values[-1])
    if not (lo <= eps_star <= hi):
        raise ConfigError(
            f"eps_star {eps_star!r} lies outside the eps grid [{lo}, {hi}]"
        )
    return float(eps_star)


def run_sweep(config: RunConfig) -> SweepResult:
    """Run the full pipeline for one configuration.

    Raises :class:`RunFailedError` when more than 10% of the (eps, mode)
    analyses fail; anchor-calibration failures (isotropic union cloud, empty
    anchor) are always fatal and propagate as-is.
    """
    source = _make_source(config)
    eps_values = source.eps_values
    eps_star = _resolve_eps_star(config, source)
    anchor_idx = int(np.argmin(np.abs(eps_values - eps_star)))
    anchor_eps = float(eps_values[anchor_idx])

    anchor_fields = source.group(anchor_eps)
    theta_anchor, anchor_flipped, window = _anchor_frame(
        anchor_fields, config.q_lo, config.q_hi, config.padding_frac,
        config.weighting,
    )
    log.info("anchor at eps=%.6g: theta=%.6f rad, window R[%.4g, %.4g] "
             "I[%.4g, %.4g]", anchor_eps, theta_anchor,
             window.rmin, window.rmax, window.imin, window.imax)

    points = []
    for eps in eps_values:
        for mode, fld in source.group(float(eps)):
            points.append((float(eps), mode, fld))

    def attempt(point):
        eps, mode, fld = point
        try:
            outcome = analyze_field(
                fld, window, nb=config.nb, weighting=config.weighting,
                gauge_mode=config.gauge_mode, theta_anchor=theta_anchor,
                anchor_flipped=anchor_flipped, fallback_theta=None,
                keep_aligned=config.emit_scatter,
            )
            return ("ok", point, outcome)
        except IsotropicCovarianceError:
            return ("iso", point, None)
        except QuadinfoError as exc:
            return ("fail", point, f"{type(exc).__name__}: {exc}")

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(attempt, points))
    else:
        raw = [attempt(p) for p in points]

    records: dict[tuple, SweepRecord] = {}
    scatter: dict[tuple, np.ndarray] = {}
    pending = []
    failures = []

    def finish(point, outcome):
        eps, mode, fld = point
        rec = SweepRecord(
            eps=eps, mode=mode, theta=outcome.theta_used,
            lam=fld.lam, measures=outcome.measures,
            clamped_pct=outcome.clamped_pct,
            isotropic_fallback=outcome.isotropic_fallback,
        )
        records[(eps, mode)] = rec
        if config.emit_scatter and outcome.aligned is not None:
            scatter[(eps, mode)] = _scatter_subsample(outcome.aligned)

    for status, point, payload in raw:
        if status == "ok":
            finish(point, payload)
        elif status == "iso":
            pending.append(point)
        else:
            failures.append((point[0], point[1], payload))

    # Deterministic sequential resolution of isotropic fallbacks: ascending
    # eps, reusing the nearest already-processed lower eps of the same mode
    # (the anchor angle when none exists yet).
    pending.sort(key=lambda p: (p[0], p[1]))
    for point in pending:
        eps, mode, fld = point
        candidates = [r for (e, m), r in records.items()
                      if m == mode and e < eps]
        fallback = max(candidates, key=lambda r: r.eps).theta \
            if candidates else theta_anchor
        try:
            outcome = analyze_field(
                fld, window, nb=config.nb, weighting=config.weighting,
                gauge_mode=config.gauge_mode, theta_anchor=theta_anchor,
                anchor_flipped=anchor_flipped, fallback_theta=fallback,
                keep_aligned=config.emit_scatter,
            )
            finish(point, outcome)
        except QuadinfoError as exc:
            failures.append((eps, mode, f"{type(exc).__name__}: {exc}"))

    n_total = len(points)
    if failures and len(failures) > FAILURE_BUDGET * n_total:
        summary = "; ".join(f"eps={e:g}/{m}: {msg}"
                            for e, m, msg in failures[:5])
        raise RunFailedError(
            f"{len(failures)}/{n_total} analyses failed "
            f"(budget {FAILURE_BUDGET:.0%}): {summary}"
        )
    for eps, mode, msg in failures:
        log.warning("analysis failed at eps=%g mode=%s: %s", eps, mode, msg)

    ordered = tuple(records[key] for key in sorted(records))
    return SweepResult(
        records=ordered,
        failures=tuple(failures),
        eps_values=eps_values.copy(),
        eps_star=eps_star,
        anchor_eps=anchor_eps,
        theta_anchor=theta_anchor,
        anchor_flipped=anchor_flipped,
        window=window,
        config=config,
        scatter=scatter if config.emit_scatter else None,
    )


# ----------------------------------------------------------------------
# robustness suite
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessEntry:
    """Peak diagnostics of one (nb, weighting, mode) variant."""

    nb: int
    weighting: str
    mode: str
    argmax_mi_eps: Optional[float]
    argmax_hri_eps: Optional[float]
    peak_mi: float
    median_mi: float
    prominence: float


@dataclass(frozen=True)
class RobustnessReport:
    entries: tuple
    argmax_stable_across_nb: bool
    weighting_shares_argmax: bool
    weighted_prominence_ge_unit: bool


def _peak_stats(result: SweepResult, mode: str):
    recs = result.records_for(mode)
    mi = np.array([r.measures.mi for r in recs])
    hri = np.array([r.measures.h_ri for r in recs])
    eps = np.array([r.eps for r in recs])
    if eps.size < 2:
        return None, None, float(mi[0]) if mi.size else 0.0, 0.0, 0.0
    k = int(np.argmax(mi))
    kh = int(np.argmax(hri))
    peak = float(mi[k])
    med = float(np.median(mi))
    return float(eps[k]), float(eps[kh]), peak, med, peak - med


def robustness_suite(config: RunConfig) -> RobustnessReport:
    """Rerun the sweep over every (nb, weighting) variant and compare peaks.

    Checks that the MI argmax is identical across bin counts (per weighting
    and mode), that intensity and unit weighting agree on the argmax, and
    that the intensity-weighted peak prominence is at least the unit one.
    Degenerate sweeps (fewer than 2 eps points) make no argmax claims.
    """
    entries = []
    by_variant = {}
    for nb in config.robust_nb:
        for weighting in config.robust_weighting:
            variant = replace(config, nb=int(nb), weighting=weighting,
                              emit_scatter=False)
            result = run_sweep(variant)
            for mode in result.modes():
                amx, amx_h, peak, med, prom = _peak_stats(result, mode)
                entry = RobustnessEntry(
                    nb=int(nb), weighting=weighting, mode=mode,
                    argmax_mi_eps=amx, argmax_hri_eps=amx_h,
                    peak_mi=peak, median_mi=med, prominence=prom,
                )
                entries.append(entry)
                by_variant[(int(nb), weighting, mode)] = entry

    modes = sorted({e.mode for e in entries})
    stable = True
    shares = True
    sharper = True
    for mode in modes:
        for weighting in config.robust_weighting:
            argmaxes = {by_variant[(int(nb), weighting, mode)].argmax_mi_eps
                        for nb in config.robust_nb}
            argmaxes.discard(None)
            if len(argmaxes) > 1:
                stable = False
        for nb in config.robust_nb:
            if ("intensity" in config.robust_weighting and
                    "unit" in config.robust_weighting):
                a = by_variant[(int(nb), "intensity", mode)]
                b = by_variant[(int(nb), "unit", mode)]
                if a.argmax_mi_eps is not None and b.argmax_mi_eps is not None \
                        and a.argmax_mi_eps != b.argmax_mi_eps:
                    shares = False
                if a.prominence < b.prominence:
                    sharper = False

    return RobustnessReport(
        entries=tuple(entries),
        argmax_stable_across_nb=stable,
        weighting_shares_argmax=shares,
        weighted_prominence_ge_unit=sharper,
    )
