"""Noise-tolerant learning of homogeneous halfspaces.

Phase-localized learning that survives per-draw and batch instance corruption:
slab-restricted sampling, soft outlier removal by cutting planes, and
reweighted margin-scaled hinge minimization, plus the adversary simulators,
distribution samplers and spectral validators used to exercise it.
"""

from .adversary import AttackKind, AttackStrategy, LearnerStateView, MaliciousOracle, NastyOracle
from .core import (
    BandSpec,
    ConstantsProfile,
    LabeledSample,
    Phase,
    PhaseSchedule,
    Provenance,
    SearchBall,
    angle,
    build_schedule,
    named_profile,
    practical_profile,
    project_to_ball_pair,
    theory_profile,
)
from .dist import (
    DistributionSpec,
    Kind,
    MonteCarloEstimate,
    RejectionBudgetError,
    band_mass,
    err_rate_mc,
    err_rate_rotational,
    sample,
    sample_band,
)
from .hinge import HingeProblem, expected_hinge_mc, hinge_loss, minimize_hinge
from .learner import (
    LearnFailure,
    LearnResult,
    LearnerConfig,
    Mode,
    RunReport,
    phase_diagnostics,
    run_malicious,
    run_nasty,
)
from .outlier import (
    RemovalInfeasible,
    RemovalProblem,
    RemovalResult,
    separation_oracle,
    soft_outlier_removal,
    verify_weights,
)
from .spectral import SpectralStudy, chernoff_study, lambda_max, max_norm_check

__version__ = "0.1.0"
