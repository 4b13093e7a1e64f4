"""End-to-end sweep driver: calibration, per-point analysis, failure policy."""

import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from quadinfo.config import load_config
from quadinfo.errors import (
    ConfigError,
    DegenerateWindowError,
    IsotropicCovarianceError,
    RunFailedError,
)
from quadinfo.field_synth import (
    BasisModeSpec,
    CavityGeometry,
    ComplexField,
    GridSpec,
    basis_mode,
    synthesize,
)
from quadinfo.fieldfile import write_field_file
from quadinfo.gauge import SampleCloud
from quadinfo.pipeline import (
    SCATTER_MAX_POINTS,
    RunConfig,
    _scatter_subsample,
    anchor_calibration,
    analyze_field,
    robustness_suite,
    run_sweep,
)
from quadinfo.results import write_robustness_report

GRID16 = GridSpec(nx=16, ny=16, x0=-1.0, x1=1.0, y0=-1.0, y1=1.0)

TINY_OVERRIDES = {
    "cm.eps.count": 5,
    "grid.nx": 64,
    "grid.ny": 64,
    "win.nb": 50,
    "robust.nb": "40,50",
}


def _sparse_field(assignments, eps=0.1, mode="mode1"):
    """16x16 field that is zero except at the given (iy, ix) -> value nodes."""
    values = np.zeros((16, 16), dtype=np.complex128)
    for (iy, ix), v in assignments.items():
        values[iy, ix] = v
    return ComplexField.from_values(GRID16, values, eps=eps, mode=mode)


def _isotropic_orbit_field(eps=0.2, mode="mode1"):
    """Four nodes carrying v, -v, iv, -iv: a quarter-turn orbit.

    Every point of the orbit has the same radius and the RI products cancel
    pairwise, so the second moments carry no orientation at all.
    """
    v = 0.01 + 0.005j
    return _sparse_field(
        {(5, 5): v, (5, 10): -v, (10, 5): 1j * v, (10, 10): -1j * v},
        eps=eps, mode=mode,
    )


@pytest.fixture(scope="module")
def hybrid_ctx():
    """Basis pair on a shared grid plus a balanced-mixture calibration."""
    geom = CavityGeometry(eps=0.2)
    grid = GridSpec.cover([geom], nx=64, ny=64)
    phi1 = basis_mode(geom, BasisModeSpec(kx=8.0, ky=6.0, parity="even-even"), grid)
    phi2 = basis_mode(geom, BasisModeSpec(kx=9.5, ky=7.5, parity="odd-odd"), grid)
    hybrid = synthesize(np.array([1.0, 1.0j]) / np.sqrt(2.0), phi1, phi2,
                        mode="hybrid")
    theta, window = anchor_calibration([hybrid])
    return {"geom": geom, "grid": grid, "phi1": phi1, "phi2": phi2,
            "hybrid": hybrid, "theta": theta, "window": window}


def _mixture_sweep_files(tmp_path, phase=0.0):
    """Write a 3-eps x 2-mode family of mixed fields; returns the directory."""
    outdir = tmp_path / f"fields_{phase:.3f}"
    outdir.mkdir()
    eps_values = [0.10, 0.15, 0.20]
    grid = GridSpec.cover([CavityGeometry(eps=max(eps_values))], nx=48, ny=48)
    spec1 = BasisModeSpec(kx=8.0, ky=6.0, parity="even-even")
    spec2 = BasisModeSpec(kx=9.5, ky=7.5, parity="odd-odd")
    gauge = np.exp(1j * phase)
    for k, eps in enumerate(eps_values):
        geom = CavityGeometry(eps=eps)
        phi1 = basis_mode(geom, spec1, grid)
        phi2 = basis_mode(geom, spec2, grid)
        t = 0.3 + 0.2 * k
        c1 = np.array([np.cos(t), np.sin(t) * np.exp(0.3j)])
        c2 = np.array([-np.sin(t) * np.exp(-0.3j), np.cos(t)])
        for mode, c in (("mode1", c1), ("mode2", c2)):
            fld = synthesize(gauge * c, phi1, phi2, eps=eps, mode=mode,
                             lam=complex(1.0 + eps, -0.01))
            write_field_file(fld, outdir / f"e{k}_{mode}.qfld")
    return outdir


# ----------------------------------------------------------------------
# anchor calibration
# ----------------------------------------------------------------------

def test_anchor_angle_is_exactly_zero_for_axis_aligned_values():
    # Purely real and purely imaginary node values put every cloud point on
    # a coordinate axis, so every RI product is a signed zero and the angle
    # comes out of atan2 exactly.
    fld = _sparse_field({(4, 4): 0.8, (4, 10): 0.7, (10, 4): 0.6,
                         (10, 10): 0.25j, (7, 7): 0.35j})
    theta, window = anchor_calibration([fld])
    assert theta == 0.0
    assert window.quantile_lo == 0.005 and window.quantile_hi == 0.995
    assert window.rmax > window.rmin and window.imax > window.imin


def test_anchor_angle_is_exactly_a_quarter_turn_for_diagonal_values():
    # Values proportional to 1+1j / 1-1j give per-point R^2 == I^2
    # bit-identically, so the moment difference is exactly zero and
    # atan2(positive, 0) halves to pi/4 without rounding.
    fld = _sparse_field({(4, 4): 0.5 * (1 + 1j), (4, 10): 0.4 * (1 + 1j),
                         (10, 4): 0.3 * (1 + 1j), (10, 10): 0.2 * (1 - 1j)})
    theta, _ = anchor_calibration([fld])
    assert theta == math.pi / 4


def test_anchor_calibration_accepts_bare_fields_and_mode_pairs():
    fld = _sparse_field({(4, 4): 0.8, (4, 10): 0.7, (10, 10): 0.25j})
    bare = anchor_calibration([fld])
    paired = anchor_calibration([("mode1", fld)])
    assert bare == paired


def test_isotropic_anchor_cloud_is_fatal():
    with pytest.raises(IsotropicCovarianceError):
        anchor_calibration([_isotropic_orbit_field()])


# ----------------------------------------------------------------------
# single-field analysis
# ----------------------------------------------------------------------

def test_real_basis_mode_carries_no_quadrature_information(hybrid_ctx):
    # A purely real field collapses the I marginal into one bin; the mutual
    # information survives only at marginal-renormalization rounding level.
    out = analyze_field(hybrid_ctx["phi1"], hybrid_ctx["window"], nb=80)
    m = out.measures
    assert out.theta_used == 0.0
    assert abs(m.h_i) <= 1e-12
    assert abs(m.mi) <= 1e-12
    assert abs(m.mi_over_hri) <= 1e-12
    assert m.h_r > 1.0
    assert not out.isotropic_fallback


def test_balanced_mixture_spreads_entropy_over_both_quadratures(hybrid_ctx):
    out = analyze_field(hybrid_ctx["hybrid"], hybrid_ctx["window"], nb=80)
    m = out.measures
    assert 0.9 < m.h_i / m.h_r < 1.1
    assert m.mi > 0.8
    assert 0.0 < m.mi_over_hri < 1.0


def test_analysis_is_invariant_under_a_global_phase(hybrid_ctx):
    chi = 0.8137
    fld = hybrid_ctx["hybrid"]
    rotated = ComplexField.from_values(
        fld.grid, np.exp(1j * chi) * fld.values, eps=fld.eps, mode=fld.mode)
    base = analyze_field(fld, hybrid_ctx["window"], nb=80)
    other = analyze_field(rotated, hybrid_ctx["window"], nb=80)
    for name in ("h_r", "h_i", "h_ri", "mi", "mi_over_hri"):
        assert abs(getattr(base.measures, name)
                   - getattr(other.measures, name)) <= 1e-9
    assert abs(base.clamped_pct - other.clamped_pct) <= 1e-9
    # The raw angles must differ: the invariance comes from re-aligning.
    assert abs(base.theta_used - other.theta_used) > 0.1


def test_anchor_gauge_mode_uses_the_given_angle(hybrid_ctx):
    out = analyze_field(hybrid_ctx["hybrid"], hybrid_ctx["window"], nb=80,
                        gauge_mode="anchor", theta_anchor=0.3125)
    assert out.theta_used == 0.3125
    with pytest.raises(ValueError, match="theta_anchor"):
        analyze_field(hybrid_ctx["hybrid"], hybrid_ctx["window"],
                      gauge_mode="anchor")
    with pytest.raises(ValueError, match="gauge mode"):
        analyze_field(hybrid_ctx["hybrid"], hybrid_ctx["window"],
                      gauge_mode="sideways")


def test_isotropic_cloud_needs_a_fallback_angle(hybrid_ctx):
    iso = _isotropic_orbit_field()
    with pytest.raises(IsotropicCovarianceError):
        analyze_field(iso, hybrid_ctx["window"], nb=40)
    out = analyze_field(iso, hybrid_ctx["window"], nb=40, fallback_theta=0.3)
    assert out.theta_used == 0.3
    assert out.isotropic_fallback


# ----------------------------------------------------------------------
# sweep driver mechanics
# ----------------------------------------------------------------------

def test_run_config_validation():
    with pytest.raises(ConfigError, match="gauge mode"):
        RunConfig(model=None, fields_dir=".", gauge_mode="freeform")
    with pytest.raises(ConfigError, match="weighting"):
        RunConfig(fields_dir=".", weighting="quadratic")
    with pytest.raises(ConfigError, match="workers"):
        RunConfig(fields_dir=".", workers=0)
    with pytest.raises(ConfigError, match="model or a field directory"):
        RunConfig()


def test_directory_source_requires_explicit_eps_star(tmp_path):
    outdir = _mixture_sweep_files(tmp_path)
    with pytest.raises(ConfigError, match="explicitly"):
        run_sweep(RunConfig(fields_dir=outdir, nb=40))


def test_eps_star_outside_the_grid_is_rejected(tmp_path):
    outdir = _mixture_sweep_files(tmp_path)
    with pytest.raises(ConfigError, match="outside the eps grid"):
        run_sweep(RunConfig(fields_dir=outdir, nb=40, eps_star=5.0))


def test_directory_sweep_records_are_sorted_and_complete(tmp_path):
    outdir = _mixture_sweep_files(tmp_path)
    result = run_sweep(RunConfig(fields_dir=outdir, nb=40, eps_star=0.16))
    keys = [(r.eps, r.mode) for r in result.records]
    assert keys == sorted(keys)
    assert len(result.records) == 6
    assert result.modes() == ["mode1", "mode2"]
    assert [r.eps for r in result.records_for("mode1")] == [0.10, 0.15, 0.20]
    assert result.anchor_eps == 0.15  # nearest grid point to 0.16
    assert result.eps_star == 0.16
    assert -0.5 * math.pi < result.theta_anchor <= 0.5 * math.pi
    assert result.failures == ()
    assert all(r.lam == complex(1.0 + r.eps, -0.01) for r in result.records)
    assert not any(r.isotropic_fallback for r in result.records)
    assert result.scatter is None


def test_directory_sweep_is_invariant_under_a_global_phase(tmp_path):
    base = run_sweep(RunConfig(fields_dir=_mixture_sweep_files(tmp_path),
                               nb=40, eps_star=0.15))
    spun = run_sweep(RunConfig(
        fields_dir=_mixture_sweep_files(tmp_path, phase=0.8137),
        nb=40, eps_star=0.15))
    assert len(base.records) == len(spun.records)
    for a, b in zip(base.records, spun.records):
        assert (a.eps, a.mode) == (b.eps, b.mode)
        for name in ("h_r", "h_i", "h_ri", "mi", "mi_over_hri"):
            assert abs(getattr(a.measures, name)
                       - getattr(b.measures, name)) <= 1e-9
        assert abs(a.clamped_pct - b.clamped_pct) <= 1e-9


def test_worker_count_does_not_change_any_record():
    config = load_config("reference", overrides=TINY_OVERRIDES)
    serial = run_sweep(replace(config, workers=1))
    threaded = run_sweep(replace(config, workers=4))
    assert serial.records == threaded.records
    assert serial.theta_anchor == threaded.theta_anchor
    assert serial.window == threaded.window


def test_isotropic_cloud_reuses_the_nearest_lower_eps_angle(tmp_path):
    outdir = tmp_path / "fields"
    outdir.mkdir()
    anchor = _sparse_field({(4, 4): 0.8, (4, 10): 0.7, (10, 10): 0.25j},
                           eps=0.1, mode="mode1")
    write_field_file(anchor, outdir / "a.qfld")
    write_field_file(_isotropic_orbit_field(eps=0.2, mode="mode1"),
                     outdir / "b.qfld")
    result = run_sweep(RunConfig(fields_dir=outdir, nb=12, eps_star=0.1))
    first, second = result.records
    assert (first.eps, second.eps) == (0.1, 0.2)
    assert not first.isotropic_fallback
    assert second.isotropic_fallback
    assert second.theta == first.theta  # reused verbatim, not recomputed


def test_isotropic_cloud_at_the_anchor_aborts_the_run(tmp_path):
    outdir = tmp_path / "fields"
    outdir.mkdir()
    write_field_file(_isotropic_orbit_field(eps=0.2), outdir / "only.qfld")
    with pytest.raises(IsotropicCovarianceError):
        run_sweep(RunConfig(fields_dir=outdir, nb=12, eps_star=0.2))


def test_failure_budget_tolerates_isolated_gaps(tmp_path, caplog):
    outdir = _mixture_sweep_files(tmp_path)
    # Add zero fields at three more eps values (both modes analyzable) plus
    # one dead (eps, mode): 1 failure out of 12 points stays inside budget.
    grid = GridSpec.cover([CavityGeometry(eps=0.2)], nx=48, ny=48)
    spec1 = BasisModeSpec(kx=8.0, ky=6.0, parity="even-even")
    spec2 = BasisModeSpec(kx=9.5, ky=7.5, parity="odd-odd")
    for k, eps in enumerate([0.25, 0.30, 0.35]):
        geom = CavityGeometry(eps=eps)
        phi1 = basis_mode(geom, spec1, grid)
        phi2 = basis_mode(geom, spec2, grid)
        write_field_file(synthesize([0.8, 0.6], phi1, phi2, eps=eps,
                                    mode="mode1"),
                         outdir / f"x{k}_mode1.qfld")
        if eps == 0.35:
            dead = ComplexField.from_values(
                grid, np.zeros((48, 48), dtype=np.complex128),
                eps=eps, mode="mode2")
            write_field_file(dead, outdir / f"x{k}_mode2.qfld")
        else:
            write_field_file(synthesize([0.6, -0.8j], phi1, phi2, eps=eps,
                                        mode="mode2"),
                             outdir / f"x{k}_mode2.qfld")
    with caplog.at_level(logging.WARNING, logger="quadinfo.pipeline"):
        result = run_sweep(RunConfig(fields_dir=outdir, nb=40, eps_star=0.15))
    assert len(result.records) == 11
    assert len(result.failures) == 1
    eps, mode, message = result.failures[0]
    assert (eps, mode) == (0.35, "mode2")
    assert "EmptyCloudError" in message
    assert (0.35, "mode2") not in {(r.eps, r.mode) for r in result.records}
    assert any("analysis failed at eps=0.35" in rec.message
               for rec in caplog.records)


def test_failure_budget_aborts_when_exceeded(tmp_path):
    outdir = tmp_path / "fields"
    outdir.mkdir()
    for k, eps in enumerate([0.1, 0.2, 0.3]):
        if eps == 0.3:
            fld = ComplexField.from_values(
                GRID16, np.zeros((16, 16), dtype=np.complex128),
                eps=eps, mode="mode1")
        else:
            fld = _sparse_field({(4, 4): 0.8, (4, 10): 0.7, (10, 10): 0.25j},
                                eps=eps, mode="mode1")
        write_field_file(fld, outdir / f"f{k}.qfld")
    with pytest.raises(RunFailedError, match="budget"):
        run_sweep(RunConfig(fields_dir=outdir, nb=12, eps_star=0.1))


# ----------------------------------------------------------------------
# scatter emission
# ----------------------------------------------------------------------

def test_scatter_subsample_honors_the_point_cap():
    rng = np.random.default_rng(7)
    n = 12001
    cloud = SampleCloud(points=rng.normal(size=(n, 2)),
                        weights=rng.random(n) + 0.1)
    arr = _scatter_subsample(cloud)
    assert arr.shape == (4001, 3)  # stride 3 for 12001 points
    assert arr.shape[0] <= SCATTER_MAX_POINTS
    np.testing.assert_array_equal(arr[:, :2], cloud.points[::3])
    np.testing.assert_array_equal(arr[:, 2], cloud.weights[::3])


def test_sweep_scatter_matches_a_standalone_analysis(tmp_path):
    outdir = _mixture_sweep_files(tmp_path)
    config = RunConfig(fields_dir=outdir, nb=40, eps_star=0.15,
                       emit_scatter=True)
    result = run_sweep(config)
    assert set(result.scatter) == {(r.eps, r.mode) for r in result.records}
    for arr in result.scatter.values():
        assert arr.ndim == 2 and arr.shape[1] == 3
        assert arr.shape[0] <= SCATTER_MAX_POINTS
        assert np.isfinite(arr).all()
    from quadinfo.fieldfile import read_field_file
    fld = read_field_file(outdir / "e1_mode2.qfld")
    out = analyze_field(fld, result.window, nb=40, keep_aligned=True)
    arr = result.scatter[(0.15, "mode2")]
    np.testing.assert_array_equal(arr[:, :2], out.aligned.points)
    np.testing.assert_array_equal(arr[:, 2], out.aligned.weights)


# ----------------------------------------------------------------------
# physics-regime behavior
# ----------------------------------------------------------------------

def test_near_decoupled_mixing_leaves_no_information_peak():
    # With g six orders below the detuning scale the eigenvectors barely
    # hybridize, the fields stay essentially real after the phase gauge, and
    # the mutual-information trace goes flat.  The thresholds sit well above
    # the dry-run values (peak 0.027, prominence 0.0020 at this exact size)
    # and far below the coupled reference (prominence 1.68).
    config = load_config("reference", overrides={
        "cm.g": "1e-6", "grid.nx": 64, "grid.ny": 64,
        "cm.eps.count": 15, "win.nb": 120,
    })
    result = run_sweep(config)
    for mode in result.modes():
        mi = np.array([r.measures.mi for r in result.records_for(mode)])
        assert mi.max() < 0.1
        assert mi.max() - np.median(mi) < 0.02


def test_fully_decoupled_preset_has_a_degenerate_window():
    # g == 0 keeps both fields purely real (up to phase-gauge rounding dust),
    # so the anchor window has no imaginary spread to bin.
    config = load_config("decoupled", overrides={
        "grid.nx": 64, "grid.ny": 64, "cm.eps.count": 5,
    })
    with pytest.raises(DegenerateWindowError, match="quantile span collapsed"):
        run_sweep(config)


def test_reference_run_stays_inside_its_window(reference_sweep):
    result, _ = reference_sweep
    assert len(result.records) == 90
    assert result.failures == ()
    clamped = np.array([r.clamped_pct for r in result.records])
    assert clamped.max() < 1.0
    assert not any(r.isotropic_fallback for r in result.records)


# ----------------------------------------------------------------------
# robustness edge case
# ----------------------------------------------------------------------

def test_single_eps_robustness_makes_no_peak_claims(tmp_path):
    outdir = tmp_path / "fields"
    outdir.mkdir()
    fld = _sparse_field({(4, 4): 0.8, (4, 10): 0.7, (10, 10): 0.25j},
                        eps=0.1, mode="mode1")
    write_field_file(fld, outdir / "only.qfld")
    config = RunConfig(fields_dir=outdir, nb=12, eps_star=0.1,
                       robust_nb=(10, 12), robust_weighting=("intensity", "unit"))
    report = robustness_suite(config)
    assert len(report.entries) == 4
    assert all(e.argmax_mi_eps is None and e.argmax_hri_eps is None
               for e in report.entries)
    assert report.argmax_stable_across_nb
    assert report.weighting_shares_argmax
    path = write_robustness_report(report, tmp_path / "robustness.csv")
    text = path.read_text()
    assert "nan" in text
