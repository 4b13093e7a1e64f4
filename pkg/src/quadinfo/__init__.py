"""quadinfo: quadrature-plane information analysis of coupled-mode fields.

Two lossy resonator modes hybridize through a real coupling; sweeping a
detuning parameter through the avoided crossing reshapes the complex field of
each eigenmode.  This package synthesizes (or ingests) those fields, fixes
the global-phase gauge from weighted second moments, bins the (Re, Im)
samples in a window anchored at the crossing, and tracks Shannon entropies
and the mutual information between the two quadratures across the sweep.
"""

from ._accel import BACKEND, USING_NUMBA
from .coupled_mode import (
    BranchTrace,
    DetuningModel,
    EffectiveHamiltonian,
    eigenvalues,
    eigenvectors,
    locate_ac,
    sweep_spectrum,
)
from .errors import (
    ConfigError,
    DegenerateGridError,
    DegenerateWindowError,
    EmptyCloudError,
    ExceptionalPointError,
    GridMismatchError,
    IsotropicCovarianceError,
    NotNormalizedError,
    ParseError,
    QuadinfoError,
    RunFailedError,
    ShapeMismatchError,
    VersionError,
    ZeroWeightError,
)
from .field_synth import (
    BasisModeSpec,
    CavityGeometry,
    ComplexField,
    GridSpec,
    basis_mode,
    synth_sweep,
    synthesize,
)
from .gauge import (
    CovarianceMatrix,
    GaugeFrame,
    SampleCloud,
    align,
    canonical_align,
    merge_clouds,
    orientation_angle,
    retain_interior,
    weighted_covariance,
)
from .infotheory import InfoMeasures, entropy, joint_entropy, mutual_information
from .pipeline import (
    RobustnessReport,
    RunConfig,
    SweepRecord,
    SweepResult,
    analyze_field,
    anchor_calibration,
    robustness_suite,
    run_sweep,
)
from .quad_hist import (
    MarginalPair,
    QuadratureHistogram,
    Window,
    bin_index,
    global_window,
    histogram,
    marginals,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "USING_NUMBA",
    "BranchTrace",
    "DetuningModel",
    "EffectiveHamiltonian",
    "eigenvalues",
    "eigenvectors",
    "locate_ac",
    "sweep_spectrum",
    "BasisModeSpec",
    "CavityGeometry",
    "ComplexField",
    "GridSpec",
    "basis_mode",
    "synth_sweep",
    "synthesize",
    "CovarianceMatrix",
    "GaugeFrame",
    "SampleCloud",
    "align",
    "canonical_align",
    "merge_clouds",
    "orientation_angle",
    "retain_interior",
    "weighted_covariance",
    "InfoMeasures",
    "entropy",
    "joint_entropy",
    "mutual_information",
    "MarginalPair",
    "QuadratureHistogram",
    "Window",
    "bin_index",
    "global_window",
    "histogram",
    "marginals",
    "RobustnessReport",
    "RunConfig",
    "SweepRecord",
    "SweepResult",
    "analyze_field",
    "anchor_calibration",
    "robustness_suite",
    "run_sweep",
    "QuadinfoError",
    "ConfigError",
    "DegenerateGridError",
    "DegenerateWindowError",
    "EmptyCloudError",
    "ExceptionalPointError",
    "GridMismatchError",
    "IsotropicCovarianceError",
    "NotNormalizedError",
    "ParseError",
    "RunFailedError",
    "ShapeMismatchError",
    "VersionError",
    "ZeroWeightError",
]
