"""Steering measures of quantum assemblages and their measurement-device-independent games."""

__version__ = "0.1.0"

from .assemblage import Assemblage, LhsModel, enumerate_strategies, from_state_and_measurements, is_unsteerable
from .measures import WitnessSet, local_bound, shifted_witness, steerable_weight, steering_fraction, steering_robustness
from .mdi import (
    BetaGame,
    CorrelationTable,
    TomoSet,
    apply_loss,
    beta_from_witness,
    correlations,
    lhs_payoff_bound,
    mdi_measure,
    mdi_ratio,
    pauli_tomo_set,
    payoff,
    qudit_tomo_set,
)
from .werner import visibility_sweep, werner_assemblage, werner_state
