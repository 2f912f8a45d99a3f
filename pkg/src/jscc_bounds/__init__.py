"""Distortion bounds for lossy transmission of correlated sources over a MAC.

Gaussian model: uncoded and hybrid-coding inner bounds, the outer bound and
its symmetric specialisation.  Discrete model: single-letter certificates,
common parts and the common-message MAC region.  Correlation measures and
their property suites.
"""

from .errors import (
    BoundsError,
    DegenerateConditioningError,
    DegenerateVariableError,
    InvalidProblemError,
    NotMarkovError,
    ParameterOverflowError,
    ValidationError,
)
from .gaussian import (
    GaussianProblem,
    LabeledCovariance,
    SourceDecomposition,
    build_source_covariance,
    conditional_rho,
    log_det_ratio,
    mmse_reduce,
    sample_sources,
)
from .hybrid import (
    HybridEvaluation,
    HybridParams,
    assemble_transfer_matrix,
    embed_uncoded,
    evaluate_hybrid,
    hybrid_joint_covariance,
    optimize_hybrid,
)
from .outer import (
    MembershipVerdict,
    OuterGrid,
    outer_membership,
    rd_joint,
    rd_joint_given_common,
    symmetric_member,
    symmetric_outer_min_distortion,
)
from .pmf import JointPmf
from .sweep import RegionSample, SweepSpec, run_sweep
from .uncoded import UncodedGains, optimize_uncoded, simulate_uncoded, uncoded_distortions

__version__ = "0.1.0"
