"""Result serialization: sweep CSV (QRES v1), calibration (QCAL v1),
robustness report, and per-figure plot series.

All numeric output uses 17 significant digits (lossless double round-trip)
and LF line endings.  The sweep CSV starts with ``#`` metadata lines — the
format tag, a timestamp, the configuration hash and the calibration — then a
header row and one data row per analyzed (eps, mode), eps ascending.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import config_hash, read_kv_file
from .errors import ParseError
from .pipeline import RobustnessReport, SweepRecord, SweepResult
from .quad_hist import Window

RESULTS_TAG = "QRES"
RESULTS_VERSION = 1
CALIBRATION_TAG = "QCAL"
CALIBRATION_VERSION = 1

CSV_HEADER = ("eps,mode,theta_rad,re_lambda,im_lambda,H_R,H_I,H_RI,MI,"
              "MI_over_HRI,NB,weighting,clamped_pct,isotropic_flag")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def format_record(rec: SweepRecord) -> str:
    lam = rec.lam
    lam_re = _fmt(lam.real) if lam is not None else "nan"
    lam_im = _fmt(lam.imag) if lam is not None else "nan"
    m = rec.measures
    return ",".join([
        _fmt(rec.eps),
        rec.mode,
        _fmt(rec.theta),
        lam_re,
        lam_im,
        _fmt(m.h_r),
        _fmt(m.h_i),
        _fmt(m.h_ri),
        _fmt(m.mi),
        _fmt(m.mi_over_hri),
        str(m.nb),
        m.weighting if m.weighting is not None else "intensity",
        _fmt(rec.clamped_pct),
        "1" if rec.isotropic_fallback else "0",
    ])


def _window_lines(window: Window, nb: Optional[int] = None) -> list:
    lines = [
        f"# win.rmin = {_fmt(window.rmin)}",
        f"# win.rmax = {_fmt(window.rmax)}",
        f"# win.imin = {_fmt(window.imin)}",
        f"# win.imax = {_fmt(window.imax)}",
        f"# win.qlo = {_fmt(window.quantile_lo)}",
        f"# win.qhi = {_fmt(window.quantile_hi)}",
        f"# win.pad = {_fmt(window.padding_frac)}",
    ]
    if nb is not None:
        lines.append(f"# win.nb = {nb}")
    return lines


def write_results_csv(result: SweepResult, path) -> Path:
    """Write the sweep CSV.  Everything except the timestamp line is a pure
    function of the configuration, so repeated runs are byte-identical up to
    that one line."""
    path = Path(path)
    lines = [f"# {RESULTS_TAG} v{RESULTS_VERSION}"]
    lines.append(f"# timestamp = {_timestamp()}")
    if result.config is not None:
        lines.append(f"# config_hash = {config_hash(result.config)}")
        lines.append(f"# gauge.mode = {result.config.gauge_mode}")
        lines.append(f"# hist.weighting = {result.config.weighting}")
    lines.append(f"# anchor.eps_star = {_fmt(result.eps_star)}")
    lines.append(f"# anchor.eps = {_fmt(result.anchor_eps)}")
    lines.append(f"# theta_anchor = {_fmt(result.theta_anchor)}")
    if result.window is not None:
        nb = result.config.nb if result.config is not None else None
        lines += _window_lines(result.window, nb)
    for eps, mode, msg in result.failures:
        lines.append(f"# failed: eps = {_fmt(eps)}, mode = {mode}: {msg}")
    lines.append(CSV_HEADER)
    for rec in result.records:
        lines.append(format_record(rec))
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return path


@dataclass(frozen=True)
class ResultsFile:
    """Parsed sweep CSV: metadata comments plus typed rows."""

    metadata: dict
    rows: list  # dicts keyed by the CSV header names


def read_results_csv(path) -> ResultsFile:
    path = Path(path)
    metadata: dict[str, str] = {}
    rows = []
    header_cols = None
    tag_seen = False
    with path.open("r", encoding="ascii") as fh:
        for lineno, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line:
                continue
            if not tag_seen:
                parts = line.split()
                if line.startswith("#") and len(parts) == 3 \
                        and parts[1] == RESULTS_TAG \
                        and parts[2] == f"v{RESULTS_VERSION}":
                    tag_seen = True
                    continue
                raise ParseError(
                    f"expected '# {RESULTS_TAG} v{RESULTS_VERSION}' tag",
                    lineno,
                )
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    metadata[key.strip()] = value.strip()
                continue
            if header_cols is None:
                if line != CSV_HEADER:
                    raise ParseError(f"bad results header {line!r}", lineno)
                header_cols = line.split(",")
                continue
            parts = line.split(",")
            if len(parts) != len(header_cols):
                raise ParseError(
                    f"expected {len(header_cols)} fields, got {len(parts)}",
                    lineno,
                )
            row: dict = dict(zip(header_cols, parts))
            for key in ("eps", "theta_rad", "re_lambda", "im_lambda", "H_R",
                        "H_I", "H_RI", "MI", "MI_over_HRI", "clamped_pct"):
                row[key] = float(row[key])
            row["NB"] = int(row["NB"])
            row["isotropic_flag"] = row["isotropic_flag"] == "1"
            rows.append(row)
    if header_cols is None:
        raise ParseError(f"{path}: no header row found")
    return ResultsFile(metadata=metadata, rows=rows)


# ----------------------------------------------------------------------
# calibration file
# ----------------------------------------------------------------------

def write_calibration(theta_anchor: float, window: Window, eps_star: float,
                      anchor_eps: float, nb: int, path,
                      anchor_flipped: bool = False) -> Path:
    path = Path(path)
    lines = [f"# {CALIBRATION_TAG} v{CALIBRATION_VERSION}"]
    lines.append(f"theta_anchor = {_fmt(theta_anchor)}")
    lines.append(f"anchor.flipped = {'1' if anchor_flipped else '0'}")
    lines.append(f"anchor.eps_star = {_fmt(eps_star)}")
    lines.append(f"anchor.eps = {_fmt(anchor_eps)}")
    lines.append(f"win.rmin = {_fmt(window.rmin)}")
    lines.append(f"win.rmax = {_fmt(window.rmax)}")
    lines.append(f"win.imin = {_fmt(window.imin)}")
    lines.append(f"win.imax = {_fmt(window.imax)}")
    lines.append(f"win.qlo = {_fmt(window.quantile_lo)}")
    lines.append(f"win.qhi = {_fmt(window.quantile_hi)}")
    lines.append(f"win.pad = {_fmt(window.padding_frac)}")
    lines.append(f"win.nb = {nb}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return path


@dataclass(frozen=True)
class Calibration:
    theta_anchor: float
    window: Window
    eps_star: float
    anchor_eps: float
    nb: int
    anchor_flipped: bool = False


def read_calibration(path) -> Calibration:
    kv = read_kv_file(path, CALIBRATION_TAG, CALIBRATION_VERSION)
    try:
        window = Window(
            rmin=float(kv["win.rmin"]), rmax=float(kv["win.rmax"]),
            imin=float(kv["win.imin"]), imax=float(kv["win.imax"]),
            quantile_lo=float(kv["win.qlo"]),
            quantile_hi=float(kv["win.qhi"]),
            padding_frac=float(kv["win.pad"]),
        )
        return Calibration(
            theta_anchor=float(kv["theta_anchor"]),
            window=window,
            eps_star=float(kv["anchor.eps_star"]),
            anchor_eps=float(kv["anchor.eps"]),
            nb=int(kv["win.nb"]),
            anchor_flipped=kv.get("anchor.flipped", "0") == "1",
        )
    except KeyError as exc:
        raise ParseError(f"{path}: missing calibration key {exc}")
    except ValueError as exc:
        raise ParseError(f"{path}: bad calibration value: {exc}")


# ----------------------------------------------------------------------
# robustness report
# ----------------------------------------------------------------------

def write_robustness_report(report: RobustnessReport, path) -> Path:
    path = Path(path)
    lines = [f"# {RESULTS_TAG} v{RESULTS_VERSION}"]
    lines.append(f"# timestamp = {_timestamp()}")
    flags = (
        ("argmax_stable_across_nb", report.argmax_stable_across_nb),
        ("weighting_shares_argmax", report.weighting_shares_argmax),
        ("weighted_prominence_ge_unit", report.weighted_prominence_ge_unit),
    )
    for key, val in flags:
        lines.append(f"# {key} = {'1' if val else '0'}")
    lines.append("nb,weighting,mode,argmax_mi_eps,argmax_hri_eps,"
                 "peak_mi,median_mi,prominence")
    for e in report.entries:
        amx = _fmt(e.argmax_mi_eps) if e.argmax_mi_eps is not None else "nan"
        amh = _fmt(e.argmax_hri_eps) if e.argmax_hri_eps is not None else "nan"
        lines.append(",".join([
            str(e.nb), e.weighting, e.mode, amx, amh,
            _fmt(e.peak_mi), _fmt(e.median_mi), _fmt(e.prominence),
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return path


# ----------------------------------------------------------------------
# plot series
# ----------------------------------------------------------------------

def _series_path(outdir: Path, stem: str) -> Path:
    return outdir / f"{stem}.csv"


def _write_series(path: Path, columns: str, rows) -> None:
    lines = [f"# {RESULTS_TAG} v{RESULTS_VERSION}", columns]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def emit_plot_data(result: SweepResult, outdir) -> list:
    """Write two-column CSV series mirroring the standard figures.

    Per mode: spectrum real/imag parts vs eps, orientation angle (in units of
    pi) vs eps, the three entropies, MI and MI/H_RI vs eps.  When the sweep
    was run with scatter capture, the per-eps rotated subsamples are written
    too.  Every series has one row per successfully analyzed eps.  Returns
    the list of paths written.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for mode in result.modes():
        recs = result.records_for(mode)
        series = {
            f"spectrum_re_{mode}": ("eps,re_lambda",
                                    [(r.eps, r.lam.real) for r in recs
                                     if r.lam is not None]),
            f"spectrum_im_{mode}": ("eps,im_lambda",
                                    [(r.eps, r.lam.imag) for r in recs
                                     if r.lam is not None]),
            f"theta_{mode}": ("eps,theta_over_pi",
                              [(r.eps, r.theta / math.pi) for r in recs]),
            f"entropy_hr_{mode}": ("eps,H_R",
                                   [(r.eps, r.measures.h_r) for r in recs]),
            f"entropy_hi_{mode}": ("eps,H_I",
                                   [(r.eps, r.measures.h_i) for r in recs]),
            f"entropy_hri_{mode}": ("eps,H_RI",
                                    [(r.eps, r.measures.h_ri) for r in recs]),
            f"mi_{mode}": ("eps,MI",
                           [(r.eps, r.measures.mi) for r in recs]),
            f"mi_ratio_{mode}": ("eps,MI_over_HRI",
                                 [(r.eps, r.measures.mi_over_hri)
                                  for r in recs]),
        }
        for stem, (cols, rows) in series.items():
            p = _series_path(outdir, stem)
            _write_series(p, cols, rows)
            written.append(p)
    if result.scatter:
        for (eps, mode), arr in sorted(result.scatter.items()):
            idx = int(np.argmin(np.abs(result.eps_values - eps))) \
                if result.eps_values.size else 0
            p = _series_path(outdir, f"scatter_e{idx:03d}_{mode}")
            _write_series(p, "r_rot,i_rot,weight", arr.tolist())
            written.append(p)
    return written
