"""Eigen-decomposition of the 2x2 lossy coupled-mode matrix.

The dense solver (np.linalg.eig) is the oracle for everything random; the
hand-checkable cases pin down branch ordering, the phase convention, and the
exceptional-point refusal.
"""

import cmath
import math

import numpy as np
import pytest

from quadinfo import (
    DetuningModel,
    EffectiveHamiltonian,
    ExceptionalPointError,
    eigenvalues,
    eigenvectors,
    locate_ac,
    sweep_spectrum,
)
from quadinfo.config import load_config


def _pair_distance(got, ref):
    # compare eigenvalue multisets without trusting any particular ordering
    d_keep = max(abs(got[0] - ref[0]), abs(got[1] - ref[1]))
    d_swap = max(abs(got[0] - ref[1]), abs(got[1] - ref[0]))
    return min(d_keep, d_swap)


def _random_ham(rng):
    return EffectiveHamiltonian(
        omega1=rng.uniform(-10.0, 10.0),
        omega2=rng.uniform(-10.0, 10.0),
        gamma1=rng.uniform(0.0, 2.0),
        gamma2=rng.uniform(0.0, 2.0),
        g=rng.uniform(-3.0, 3.0),
    )


# ----------------------------------------------------------------------
# eigenvalues
# ----------------------------------------------------------------------

def test_decoupled_eigenvalues_are_the_diagonal():
    h = EffectiveHamiltonian(omega1=1.0, omega2=2.0, gamma1=0.1, gamma2=0.2,
                             g=0.0)
    lam_p, lam_m = eigenvalues(h)
    assert abs(lam_p - (2.0 - 0.2j)) <= 1e-15
    assert abs(lam_m - (1.0 - 0.1j)) <= 1e-15


def test_equal_real_parts_tie_broken_by_imaginary_part():
    # Same real part on both branches; the less lossy one must be "plus".
    h = EffectiveHamiltonian(omega1=1.0, omega2=1.0, gamma1=0.1, gamma2=0.3,
                             g=0.0)
    lam_p, lam_m = eigenvalues(h)
    assert abs(lam_p - (1.0 - 0.1j)) <= 1e-15
    assert abs(lam_m - (1.0 - 0.3j)) <= 1e-15


def test_eigenvalues_match_dense_solver():
    rng = np.random.default_rng(20260815)
    for _ in range(500):
        h = _random_ham(rng)
        lam_p, lam_m = eigenvalues(h)
        ref = np.linalg.eigvals(h.as_matrix()).tolist()
        scale = max(1.0, h.entry_scale())
        assert _pair_distance((lam_p, lam_m), ref) <= 1e-12 * scale


def test_trace_and_determinant_identities():
    rng = np.random.default_rng(7)
    for _ in range(500):
        h = _random_ham(rng)
        lam_p, lam_m = eigenvalues(h)
        tr = h.diag1 + h.diag2
        det = h.diag1 * h.diag2 - h.g * h.g
        scale = max(1.0, h.entry_scale())
        assert abs((lam_p + lam_m) - tr) <= 1e-12 * scale
        assert abs(lam_p * lam_m - det) <= 1e-12 * scale * scale


def test_branch_ordering_is_lexicographic():
    rng = np.random.default_rng(99)
    for _ in range(300):
        h = _random_ham(rng)
        lam_p, lam_m = eigenvalues(h)
        assert (lam_p.real, lam_p.imag) >= (lam_m.real, lam_m.imag)


def test_row_swap_preserves_the_spectrum():
    rng = np.random.default_rng(4242)
    for _ in range(200):
        h = _random_ham(rng)
        hs = EffectiveHamiltonian(omega1=h.omega2, omega2=h.omega1,
                                  gamma1=h.gamma2, gamma2=h.gamma1, g=h.g)
        assert eigenvalues(h) == eigenvalues(hs)


def test_zero_discriminant_coalesces_exactly():
    # omega1 == omega2 and gamma1 - gamma2 == -2 g makes the discriminant
    # cancel exactly in floating point, so both eigenvalues must coincide.
    h = EffectiveHamiltonian(omega1=1.0, omega2=1.0, gamma1=0.0, gamma2=0.1,
                             g=0.05)
    assert h.discriminant() == 0.0
    lam_p, lam_m = eigenvalues(h)
    assert lam_p == lam_m


def test_negative_loss_rate_rejected():
    with pytest.raises(ValueError):
        EffectiveHamiltonian(omega1=1.0, omega2=1.0, gamma1=-0.1, gamma2=0.0,
                             g=0.1)
    with pytest.raises(ValueError):
        EffectiveHamiltonian(omega1=1.0, omega2=1.0, gamma1=0.1, gamma2=-1e-9,
                             g=0.1)


def test_equal_losses_give_equal_imaginary_parts_and_repulsion():
    rng = np.random.default_rng(11)
    for _ in range(200):
        gamma = rng.uniform(0.0, 1.0)
        h = EffectiveHamiltonian(
            omega1=rng.uniform(-5.0, 5.0),
            omega2=rng.uniform(-5.0, 5.0),
            gamma1=gamma,
            gamma2=gamma,
            g=rng.uniform(-2.0, 2.0),
        )
        lam_p, lam_m = eigenvalues(h)
        # real discriminant >= g^2: the imaginary parts never split and the
        # real gap never narrows below the full coupling splitting
        assert lam_p.imag == lam_m.imag
        assert lam_p.real - lam_m.real >= 2.0 * abs(h.g) - 1e-12


def test_loss_dominated_and_coupling_dominated_regimes():
    # omega1 == omega2, gamma = 0.1 +- eps, g = 0.05: the discriminant is
    # g^2 - eps^2, so the branches split in Re for |eps| < g and in Im for
    # |eps| > g.
    g = 0.05
    for eps in (0.0, 0.02, 0.04):
        h = EffectiveHamiltonian(1.0, 1.0, 0.1 + eps, 0.1 - eps, g)
        lam_p, lam_m = eigenvalues(h)
        split = 2.0 * math.sqrt(g * g - eps * eps)
        assert abs(lam_p.imag - lam_m.imag) <= 1e-15
        assert abs((lam_p.real - lam_m.real) - split) <= 1e-14
    for eps in (0.06, 0.08, 0.1):
        h = EffectiveHamiltonian(1.0, 1.0, 0.1 + eps, 0.1 - eps, g)
        lam_p, lam_m = eigenvalues(h)
        split = 2.0 * math.sqrt(eps * eps - g * g)
        assert abs(lam_p.real - lam_m.real) <= 1e-15
        assert abs(abs(lam_p.imag - lam_m.imag) - split) <= 1e-14
        ref = np.linalg.eigvals(h.as_matrix()).tolist()
        assert _pair_distance((lam_p, lam_m), ref) <= 1e-13


# ----------------------------------------------------------------------
# eigenvectors
# ----------------------------------------------------------------------

def test_decoupled_eigenvectors_are_basis_vectors():
    h = EffectiveHamiltonian(omega1=1.0, omega2=2.0, gamma1=0.1, gamma2=0.2,
                             g=0.0)
    v_p, v_m = eigenvectors(h)
    assert np.allclose(v_p, [0.0, 1.0], atol=1e-15)
    assert np.allclose(v_m, [1.0, 0.0], atol=1e-15)


def test_resonant_eigenvectors_are_even_and_odd_mixtures():
    h = EffectiveHamiltonian(omega1=1.0, omega2=1.0, gamma1=0.1, gamma2=0.1,
                             g=0.2)
    v_p, v_m = eigenvectors(h)
    s = 1.0 / math.sqrt(2.0)
    assert np.allclose(v_p, [s, s], atol=1e-15)
    assert np.allclose(v_m, [s, -s], atol=1e-15)


def test_eigenvector_residual_norm_and_phase():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 400:
        h = _random_ham(rng)
        mat = h.as_matrix()
        scale = np.abs(mat).max()
        if abs(h.discriminant()) <= 1e-10 * scale * scale:
            continue  # keep away from near-coalescent matrices
        lams = eigenvalues(h)
        vecs = eigenvectors(h)
        for lam, v in zip(lams, vecs):
            resid = mat @ v - lam * v
            assert np.linalg.norm(resid) <= 1e-10 * max(scale, 1.0)
            assert abs(np.linalg.norm(v) - 1.0) <= 1e-12
            lead = v[0] if abs(v[0]) > 1e-12 else v[1]
            assert lead.imag == pytest.approx(0.0, abs=1e-12)
            assert lead.real > 0.0
        checked += 1


def test_eigenvectors_refuse_exceptional_point():
    h = EffectiveHamiltonian(omega1=1.0, omega2=1.0, gamma1=0.0, gamma2=0.1,
                             g=0.05)
    with pytest.raises(ExceptionalPointError):
        eigenvectors(h)


def test_exceptional_point_tolerance_scales_with_entries():
    # Same coalescence, scaled by 1e6: the refusal must key on the relative
    # size of the discriminant, not its absolute value.
    big = 1e6
    h = EffectiveHamiltonian(omega1=big, omega2=big, gamma1=0.0,
                             gamma2=0.1 * big, g=0.05 * big)
    with pytest.raises(ExceptionalPointError):
        eigenvectors(h)


# ----------------------------------------------------------------------
# detuning sweeps
# ----------------------------------------------------------------------

def test_detuning_model_validation():
    with pytest.raises(ValueError):
        DetuningModel(1.0, 0.0, -1.0, 0.0, 0.0, 0.1, 0.0, 0.1, 0.3,
                      np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        DetuningModel(1.0, 0.0, -1.0, 0.0, 0.0, 0.1, 0.0, 0.1, 0.3,
                      np.array([0.0, 1.0, 0.5]))


def test_constant_model_sweeps_flat():
    model = DetuningModel(0.0, 2.0, 0.0, 1.0, 0.0, 0.05, 0.0, 0.05, 0.1,
                          np.linspace(-1.0, 1.0, 11))
    trace = sweep_spectrum(model)
    assert len(trace) == 11
    lam_p, lam_m = eigenvalues(model.hamiltonian_at(0.0))
    np.testing.assert_array_equal(trace.lambda_plus,
                                  np.full(11, lam_p))
    np.testing.assert_array_equal(trace.lambda_minus,
                                  np.full(11, lam_m))


def test_symmetric_crossing_gap_and_location():
    # omega = +-eps, equal losses: the minimum real-part gap is exactly 2g
    # and sits at eps = 0.
    model = DetuningModel(1.0, 0.0, -1.0, 0.0, 0.0, 0.1, 0.0, 0.1, 0.3,
                          np.linspace(-1.0, 1.0, 21))
    trace = sweep_spectrum(model)
    gap = trace.lambda_plus.real - trace.lambda_minus.real
    assert np.all(gap > 0.0)
    assert abs(gap.min() - 0.6) <= 1e-12
    np.testing.assert_array_equal(trace.lambda_plus.imag,
                                  trace.lambda_minus.imag)
    assert locate_ac(trace) == 0.0


def test_branch_continuity_keeps_coefficients_smooth():
    model = DetuningModel(1.0, 0.0, -1.0, 0.0, 0.0, 0.1, 0.0, 0.1, 0.3,
                          np.linspace(-1.0, 1.0, 201))
    trace = sweep_spectrum(model)
    # adjacent eigenvalues on one branch never jump by more than the local
    # grid motion allows; a branch swap would show up as a ~2g jump at AC
    dlam = np.abs(np.diff(trace.lambda_plus))
    assert dlam.max() < 0.05
    # coefficient vectors also evolve continuously
    dvec = np.abs(np.diff(trace.coeffs_plus, axis=0)).max()
    assert dvec < 0.2


def test_locate_ac_against_direct_scan():
    rng = np.random.default_rng(314)
    for _ in range(50):
        model = DetuningModel(
            omega1_slope=rng.uniform(0.5, 4.0),
            omega1_intercept=rng.uniform(-1.0, 1.0),
            omega2_slope=-rng.uniform(0.5, 4.0),
            omega2_intercept=rng.uniform(-1.0, 1.0),
            gamma1_slope=0.0,
            gamma1_intercept=rng.uniform(0.0, 0.2),
            gamma2_slope=0.0,
            gamma2_intercept=rng.uniform(0.0, 0.2),
            g=rng.uniform(0.05, 0.5),
            eps_grid=np.linspace(-1.0, 1.0, rng.integers(5, 60)),
        )
        trace = sweep_spectrum(model)
        gap = np.abs(trace.lambda_plus.real - trace.lambda_minus.real)
        assert locate_ac(trace) == trace.eps[int(np.argmin(gap))]


def test_locate_ac_needs_three_points():
    model = DetuningModel(1.0, 0.0, -1.0, 0.0, 0.0, 0.1, 0.0, 0.1, 0.3,
                          np.linspace(-1.0, 1.0, 3))
    trace = sweep_spectrum(model)
    clipped = type(trace)(
        eps=trace.eps[:2],
        lambda_plus=trace.lambda_plus[:2],
        lambda_minus=trace.lambda_minus[:2],
        coeffs_plus=trace.coeffs_plus[:2],
        coeffs_minus=trace.coeffs_minus[:2],
    )
    with pytest.raises(ValueError):
        locate_ac(clipped)


def test_reference_preset_crossing_sits_mid_grid():
    model = load_config("reference").model
    trace = sweep_spectrum(model)
    assert abs(locate_ac(trace) - 0.16655) <= 1e-12
    # strictly avoided: the real gap never closes and the imaginary parts
    # swap order exactly once across the sweep
    gap = trace.lambda_plus.real - trace.lambda_minus.real
    assert np.all(gap > 0.0)
    dgamma = 0.010 - 0.004
    floor = 2.0 * math.sqrt(0.004 ** 2 - (dgamma / 2.0) ** 2)
    assert gap.min() >= floor - 1e-9
    imdiff = trace.lambda_plus.imag - trace.lambda_minus.imag
    signs = np.sign(imdiff)
    nz = signs[signs != 0.0]
    assert np.count_nonzero(np.diff(nz)) == 1
    # the difference may touch zero exactly at the crossing, nowhere else
    assert np.count_nonzero(signs == 0.0) <= 1


def test_spectrum_sweep_tolerates_on_grid_exceptional_point():
    # gamma = 0.1 -+ eps with g = 0.05 passes through an exceptional point
    # near eps = 0.05; the eigenvalue trace simply shows the branches
    # coinciding there (only eigenvector extraction refuses EPs).
    model = DetuningModel(0.0, 1.0, 0.0, 1.0, 1.0, 0.1, -1.0, 0.1, 0.05,
                          np.array([0.0, 0.05, 0.1]))
    trace = sweep_spectrum(model)
    assert abs(trace.lambda_plus[1] - trace.lambda_minus[1]) <= 1e-8
    with pytest.raises(ExceptionalPointError):
        eigenvectors(model.hamiltonian_at(0.05))


def test_principal_sqrt_branch_is_stable_across_signed_zero():
    # A purely negative real discriminant is the knife edge where the
    # principal square root flips sign with the sign of the zero imaginary
    # part; the ordered pair must come out identical either way.
    h = EffectiveHamiltonian(omega1=1.0, omega2=1.0, gamma1=0.3, gamma2=0.1,
                             g=0.05)
    disc = h.discriminant()
    assert disc.real < 0.0
    lam_p, lam_m = eigenvalues(h)
    mean = (h.diag1 + h.diag2) / 2.0
    root = cmath.sqrt(complex(disc.real, abs(disc.imag)))
    manual = sorted([mean + root, mean - root], key=lambda z: (z.real, z.imag))
    assert abs(manual[1] - lam_p) <= 1e-15
    assert abs(manual[0] - lam_m) <= 1e-15
