"""Numerical laboratory for heat flow on weighted model spaces."""

from .asymptotics import (
    AnnulusSpec,
    ConvergenceSeries,
    GapNorms,
    annulus,
    concentration,
    concentration_sweep,
    default_phi,
    convergence_experiment,
    gap_norms,
    rate_fit,
    signed_bump_pair,
    smooth_bump,
    triangle_bump,
)
from .counterexample import (
    ProfileLimitScan,
    HarmonicProfile,
    SupnormDemo,
    profile_limit_scan,
    harmonic_profile,
    supnorm_failure_demo,
)
from .errors import ConfigError, MassConservationError, NumericalAbort, PreconditionError
from .estimates import (
    EstimateReport,
    check_gradient,
    check_time_derivative,
    check_two_sided,
    estimate_holder,
    envelope_integrals,
    envelope_tail_scan,
    neck_gradient_scan,
)
from .evolve import (
    DiscreteOperator,
    EvolveResult,
    SolutionState,
    TimeSchedule,
    build_operator,
    evolve_to,
    make_state,
    schedule_for,
    step,
)
from .kernel import KernelSlice, euclidean_kernel, kernel_series, numeric_kernel, semigroup_check
from .space import (
    CUSTOM_DENSITY,
    DUMBBELL_LINE,
    EUCLIDEAN_RADIAL,
    SpaceSpec,
    VolumeTable,
    ball_volume,
    ball_volumes,
    build_space,
    fit_doubling_exponents,
    space_from_json,
    space_to_json,
    sphere_area,
    volume_comparison_check,
    volume_table,
)

__version__ = "0.1.0"
