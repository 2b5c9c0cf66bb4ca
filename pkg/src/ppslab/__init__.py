"""Pre- and post-selection paradoxes and their contextuality content."""

from .channels import (
    Channel,
    Instrument,
    MixtureDecomposition,
    adjoint_channel,
    luders_channel,
    luders_instrument,
    make_channel,
    make_instrument,
    mixture_decomposition,
    sequential_effect,
)
from .errors import *  # noqa: F401,F403
from .feasibility import (
    VerdictKind,
    brute_force_feasibility,
    build_constraints,
    check_extension,
    paradox_verdict,
    replay_witness,
)
from .ontmodel import (
    FiniteOntModel,
    build_toy_bit_model,
    check_coarse_graining,
    check_mixing,
    check_outcome_determinism,
    check_possibilistic_disturbance,
    classify_violation,
    make_model,
    reproduces_born,
)
from .palgebra import ProjectorAlgebra, close
from .pps import Scenario, abl, abl_assignment, instrument_conditional, joint_probability, weak_value
from .qcore import (
    PovmEffect,
    Projector,
    PureState,
    Tolerances,
    basis_projector,
    complement,
    ket_projector,
    make_state,
    validate_projector,
)

__version__ = "0.1.0"
