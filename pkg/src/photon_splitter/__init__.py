"""Linear-optics simulator for one photon at a beam splitter.

Click detectors on the two outputs never fire together, while homodyne detectors on
the same outputs record phase-dependent correlations. The package computes both
exactly in a truncated Fock space and reproduces them by seeded Monte Carlo.
"""

from .errors import (
    CutoffExceeded,
    CutoffTooLarge,
    DimensionMismatch,
    DomainError,
    GridTooNarrow,
    ModeIndexError,
    NeverClicks,
    NoConvergence,
    ParseError,
    SpecCountMismatch,
    TooFewPhases,
    UnknownExperiment,
    ValidationError,
)
from .fock import (
    DensityMatrix,
    PureState,
    QuadratureGrid,
    TwoModeUnitary,
    apply_two_mode,
    beam_splitter,
    expectation_xx,
    fidelity,
    make_fock_state,
    partial_trace,
    phase_shift,
    quadrature_density,
    quadrature_wavefunction,
    zero_point_field_variance,
)
from .measurement import (
    ClickRecord,
    DetectorSpec,
    QuadratureSample,
    QuadratureSamples,
    click_probabilities,
    sample_clicks,
    sample_homodyne,
    sample_joint_homodyne,
)
from .sources import HeraldedSourceSpec, herald, two_mode_squeezed
from .tomography import (
    HomodyneTomography,
    analytic_fock_wigner,
    bin_povm,
    bin_samples,
    mle_reconstruct,
    wigner_from_density,
)

__version__ = "0.1.0"

__all__ = [
    "HeraldedSourceSpec",
    "herald",
    "two_mode_squeezed",
    "CutoffExceeded",
    "CutoffTooLarge",
    "DimensionMismatch",
    "DomainError",
    "GridTooNarrow",
    "ModeIndexError",
    "NeverClicks",
    "NoConvergence",
    "ParseError",
    "SpecCountMismatch",
    "TooFewPhases",
    "UnknownExperiment",
    "ValidationError",
    "DensityMatrix",
    "PureState",
    "QuadratureGrid",
    "TwoModeUnitary",
    "apply_two_mode",
    "beam_splitter",
    "expectation_xx",
    "fidelity",
    "make_fock_state",
    "partial_trace",
    "phase_shift",
    "quadrature_density",
    "quadrature_wavefunction",
    "zero_point_field_variance",
    "ClickRecord",
    "DetectorSpec",
    "QuadratureSample",
    "QuadratureSamples",
    "click_probabilities",
    "sample_clicks",
    "sample_homodyne",
    "sample_joint_homodyne",
    "HomodyneTomography",
    "analytic_fock_wigner",
    "bin_povm",
    "bin_samples",
    "mle_reconstruct",
    "wigner_from_density",
]
