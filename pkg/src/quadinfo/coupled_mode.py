"""Two-mode effective model: complex eigenvalues, eigenvectors, sweeps.

The model is a 2x2 symmetric-coupling matrix

    [[omega1 - i*gamma1,  g               ],
     [g,                  omega2 - i*gamma2]]

with real resonance positions ``omega_j``, nonnegative loss rates
``gamma_j`` and a real coherent coupling ``g``.  Closed-form eigenvalues are

    lam_pm = (D1 + D2)/2 +- sqrt(((D1 - D2)/2)**2 + g**2)

with the principal complex square root; ``lam_plus`` is always the root with
the larger real part (ties broken by the larger imaginary part).  Detuning
sweeps scan an external parameter ``eps`` through an avoided crossing where
the real parts repel and — in the subcritical regime
``|gamma1 - gamma2|/2 < |g|`` — the imaginary parts cross.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from .errors import ExceptionalPointError

# Relative tolerance below which the discriminant is treated as an exceptional
# point and eigenvector computation is refused.
EP_RTOL = 1e-14

# Threshold used when locating the first nonzero eigenvector component for the
# phase convention (components of a unit vector, so this is far below any
# genuinely nonzero entry).
_PHASE_TOL = 1e-12


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Parameters of the 2x2 coupled-mode matrix."""

    omega1: float
    omega2: float
    gamma1: float
    gamma2: float
    g: float

    def __post_init__(self):
        if self.gamma1 < 0.0 or self.gamma2 < 0.0:
            raise ValueError("loss rates must be nonnegative")

    @property
    def diag1(self) -> complex:
        """First diagonal entry omega1 - i*gamma1."""
        return complex(self.omega1, -self.gamma1)

    @property
    def diag2(self) -> complex:
        """Second diagonal entry omega2 - i*gamma2."""
        return complex(self.omega2, -self.gamma2)

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.diag1, self.g], [self.g, self.diag2]], dtype=np.complex128
        )

    def discriminant(self) -> complex:
        """((D1 - D2)/2)**2 + g**2 — zero exactly at an exceptional point."""
        half = (self.diag1 - self.diag2) / 2.0
        return half * half + self.g * self.g

    def entry_scale(self) -> float:
        return max(abs(self.diag1), abs(self.diag2), abs(self.g))


def eigenvalues(h: EffectiveHamiltonian) -> tuple[complex, complex]:
    """Closed-form eigenvalue pair (lam_plus, lam_minus).

    ``lam_plus`` has the larger real part; exact real-part ties are broken by
    the larger imaginary part, which makes the labeling total and
    deterministic (the principal square root alone does not fix the sign of
    a purely imaginary branch when the discriminant carries a signed zero).
    """
    mean = (h.diag1 + h.diag2) / 2.0
    root = cmath.sqrt(h.discriminant())
    lam_a = mean + root
    lam_b = mean - root
    if (lam_a.real, lam_a.imag) >= (lam_b.real, lam_b.imag):
        return lam_a, lam_b
    return lam_b, lam_a


def _eigvec_unchecked(h: EffectiveHamiltonian, lam: complex) -> np.ndarray:
    """Unit eigenvector for ``lam`` with the first nonzero entry real-positive.

    Two algebraically parallel candidates exist,
    ``(g, lam - D1)`` and ``(lam - D2, g)``;
    the better-conditioned (larger-norm) one is used, which also covers the
    decoupled g = 0 case.  No exceptional-point check is performed here.
    """
    va = np.array([h.g, lam - h.diag1], dtype=np.complex128)
    vb = np.array([lam - h.diag2, h.g], dtype=np.complex128)
    na = abs(va[0]) ** 2 + abs(va[1]) ** 2
    nb = abs(vb[0]) ** 2 + abs(vb[1]) ** 2
    v = va if na >= nb else vb
    norm = np.sqrt((abs(v[0]) ** 2 + abs(v[1]) ** 2))
    if norm == 0.0:
        # Degenerate diagonal case (g = 0 and lam equal to both entries):
        # any direction is an eigenvector; pick the first axis.
        return np.array([1.0 + 0.0j, 0.0 + 0.0j])
    v = v / norm
    lead = v[0] if abs(v[0]) > _PHASE_TOL else v[1]
    v = v * (lead.conjugate() / abs(lead))
    return v


def eigenvectors(h: EffectiveHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """Unit eigenvectors ``(v_plus, v_minus)`` matching :func:`eigenvalues`.

    Raises :class:`ExceptionalPointError` when the discriminant magnitude is
    below ``1e-14`` relative to the squared entry scale, i.e. when the matrix
    is numerically defective and no reliable eigenbasis exists.
    """
    scale = h.entry_scale()
    if abs(h.discriminant()) <= EP_RTOL * max(scale * scale, np.finfo(float).tiny):
        raise ExceptionalPointError(
            f"discriminant {h.discriminant():.3e} is below the exceptional-point "
            f"tolerance for entry scale {scale:.3e}"
        )
    lam_p, lam_m = eigenvalues(h)
    return _eigvec_unchecked(h, lam_p), _eigvec_unchecked(h, lam_m)


@dataclass(frozen=True)
class DetuningModel:
    """Affine-in-eps parametrization of the coupled-mode matrix.

    Each of ``omega1/omega2/gamma1/gamma2`` is ``intercept + slope * eps``;
    the coupling ``g`` is constant across the sweep.
    """

    omega1_slope: float
    omega1_intercept: float
    omega2_slope: float
    omega2_intercept: float
    gamma1_slope: float
    gamma1_intercept: float
    gamma2_slope: float
    gamma2_intercept: float
    g: float
    eps_grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = np.asarray(self.eps_grid, dtype=np.float64)
        object.__setattr__(self, "eps_grid", grid)
        if grid.ndim != 1 or grid.size < 3:
            raise ValueError("eps grid must be 1-D with at least 3 points")
        if not np.all(np.diff(grid) > 0.0):
            raise ValueError("eps grid must be strictly increasing")

    def hamiltonian_at(self, eps: float) -> EffectiveHamiltonian:
        return EffectiveHamiltonian(
            omega1=self.omega1_intercept + self.omega1_slope * eps,
            omega2=self.omega2_intercept + self.omega2_slope * eps,
            gamma1=self.gamma1_intercept + self.gamma1_slope * eps,
            gamma2=self.gamma2_intercept + self.gamma2_slope * eps,
            g=self.g,
        )


@dataclass(frozen=True)
class BranchTrace:
    """Continuity-tracked eigenvalue branches over a detuning grid.

    ``lambda_plus``/``lambda_minus`` are seeded by the larger/smaller-real-part
    label at the first grid point and then tracked by minimal complex motion
    between consecutive grid points, so each array follows one physical branch
    through the avoided crossing.  ``coeffs_*[k]`` is the unit eigenvector
    belonging to ``lambda_*[k]``.
    """

    eps: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    coeffs_plus: np.ndarray
    coeffs_minus: np.ndarray

    def __len__(self):
        return self.eps.size


def sweep_spectrum(model: DetuningModel) -> BranchTrace:
    """Evaluate both eigenvalue branches over the model's eps grid.

    Branch labels are made continuous in eps: between consecutive grid points
    the two-element assignment minimizing |lam_a(k) - lam_a(k+1)| +
    |lam_b(k) - lam_b(k+1)| is kept (ties keep the current assignment).  At an
    exceptional point on the grid the two branches simply coincide; the
    coalesced eigenvector is stored for both.
    """
    eps = model.eps_grid
    n = eps.size
    lam_p = np.empty(n, dtype=np.complex128)
    lam_m = np.empty(n, dtype=np.complex128)
    vec_p = np.empty((n, 2), dtype=np.complex128)
    vec_m = np.empty((n, 2), dtype=np.complex128)
    for k in range(n):
        h = model.hamiltonian_at(float(eps[k]))
        a, b = eigenvalues(h)
        va = _eigvec_unchecked(h, a)
        vb = _eigvec_unchecked(h, b)
        if k > 0:
            keep = abs(lam_p[k - 1] - a) + abs(lam_m[k - 1] - b)
            swap = abs(lam_p[k - 1] - b) + abs(lam_m[k - 1] - a)
            if swap < keep:
                a, b = b, a
                va, vb = vb, va
        lam_p[k] = a
        lam_m[k] = b
        vec_p[k] = va
        vec_m[k] = vb
    return BranchTrace(
        eps=eps.copy(),
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        coeffs_plus=vec_p,
        coeffs_minus=vec_m,
    )


def locate_ac(trace: BranchTrace) -> float:
    """Grid eps minimizing the real-part gap |Re lam_plus - Re lam_minus|.

    Ties resolve to the smallest eps (first occurrence).  Requires at least
    three grid points to be meaningful.
    """
    if len(trace) < 3:
        raise ValueError("branch trace must cover at least 3 grid points")
    gap = np.abs(trace.lambda_plus.real - trace.lambda_minus.real)
    return float(trace.eps[int(np.argmin(gap))])
