"""Toolkit for leaderless population protocols: model, simulation,
reachability-based verification, transition-sequence surgery, linear-function
classifiers, and builtin/compiled protocols."""

from popproto.core import (
    Configuration,
    CountError,
    DomainError,
    DuplicateTransition,
    InvalidAt,
    NotApplicable,
    ParseError,
    Protocol,
    ProtocolError,
    RoleError,
    State,
    Transition,
    TransitionSequence,
    apply_transition,
    execute_path,
    is_applicable,
    is_silent,
    parse_protocol,
)
from popproto.linear import (
    AffineFit,
    Constant,
    Counterexample,
    CounterexamplePair,
    DimensionMismatch,
    LinearClass,
    LinearClassification,
    LinearSpec,
    PeriodicCoset,
    SemilinearSet,
    check_eventually_affine_window,
    check_eventually_constant_window,
    classify_linear,
    coset_member,
    is_alpha_dense,
    semilinear_member,
)
from popproto.protocols import (
    NegativeCoefficient,
    NonNaturalCoefficient,
    ProtocolInstance,
    UnknownName,
    builtin,
    builtin_names,
    compile_nlinear,
    compile_qlinear_approx,
)
from popproto.surgery import (
    BufferTooSmall,
    DeltaOrdering,
    InsufficientOccurrences,
    InvalidEdit,
    NotOrderable,
    SurgeryError,
    SurgeryMatrices,
    SurgeryWarning,
    build_matrices,
    eliminate_delta,
    find_delta_ordering,
    produce_e,
    push_delta,
    verify_path_validity,
)

__all__ = [
    "Configuration",
    "CountError",
    "DomainError",
    "DuplicateTransition",
    "InvalidAt",
    "NotApplicable",
    "ParseError",
    "Protocol",
    "ProtocolError",
    "RoleError",
    "State",
    "Transition",
    "TransitionSequence",
    "apply_transition",
    "execute_path",
    "is_applicable",
    "is_silent",
    "parse_protocol",
    "AffineFit",
    "Constant",
    "Counterexample",
    "CounterexamplePair",
    "DimensionMismatch",
    "LinearClass",
    "LinearClassification",
    "LinearSpec",
    "PeriodicCoset",
    "SemilinearSet",
    "check_eventually_affine_window",
    "check_eventually_constant_window",
    "classify_linear",
    "coset_member",
    "is_alpha_dense",
    "semilinear_member",
    "NegativeCoefficient",
    "NonNaturalCoefficient",
    "ProtocolInstance",
    "UnknownName",
    "builtin",
    "builtin_names",
    "compile_nlinear",
    "compile_qlinear_approx",
    "BufferTooSmall",
    "DeltaOrdering",
    "InsufficientOccurrences",
    "InvalidEdit",
    "NotOrderable",
    "SurgeryError",
    "SurgeryMatrices",
    "SurgeryWarning",
    "build_matrices",
    "eliminate_delta",
    "find_delta_ordering",
    "produce_e",
    "push_delta",
    "verify_path_validity",
]
