"""Invariants, Poisson algebras and symmetry flows of commensurate harmonic oscillators."""

from .core import (
    AmbiguityElement,
    FrequencySignature,
    PhasePoint,
    ReducedPoint,
    SignatureError,
    ambiguity_apply,
    coordinate_views,
    fiber_rotate,
    make_signature,
    reduce,
)
from .invariants import (
    InvariantSet,
    RelAngleSet,
    ZeroActionError,
    cone_residual,
    hamiltonian,
    invariant_set,
    k_invariant,
    rel_angles,
)
from .poisson import AlgebraReport, PhaseFunction, StencilError, bracket, exp_series_flow, iterated_bracket, verify_algebra
from .flows import (
    FlowOptions,
    Generator,
    OrbitTrace,
    SingularInputError,
    SingularityReport,
    evolve_time,
    flow_gamma,
    flow_reduced,
    flow_upsilon,
    group_compose_check,
    hopf_sample,
    lorentz_boost,
    singular_planes,
)
from .classify import OscillatorClass, PeriodCensus, classify, nonclosure_check, period_census, subsystem

__version__ = "0.1.0"
