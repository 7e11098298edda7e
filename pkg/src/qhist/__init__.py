"""Quantum histories: amplitudes, generalized Born rules, history density
matrices and history entanglement entropy."""

from .chains import (
    OutcomeSequence,
    amplitude,
    chain_operator,
    chain_probability,
    decoherence_functional,
    is_consistent_set,
    reduced_amplitude,
)
from .density import (
    HistoryDensityMatrix,
    SubsystemSplit,
    entropy,
    from_ensemble,
    from_pure,
    intermediate_entanglement_witness,
    is_product_history,
    marginal_probability,
    measure_update,
    partial_probability_rho,
    reduce,
    sequence_probability_rho,
    unknown_result_update,
)
from .histvec import (
    HistoryVector,
    SequenceProjector,
    build_history_vector,
    collapse,
    conditional_probability,
    history_content,
    partial_sequence_probability,
    sequence_probability,
    state_at_final,
    time_project,
)
from .model import ObservableSpec, SystemSchedule, computational_observable, embed_gate, validate
from .oracle import enumerate_tree, sample

__all__ = [
    "HistoryDensityMatrix",
    "HistoryVector",
    "ObservableSpec",
    "OutcomeSequence",
    "SequenceProjector",
    "SubsystemSplit",
    "SystemSchedule",
    "amplitude",
    "build_history_vector",
    "chain_operator",
    "chain_probability",
    "collapse",
    "computational_observable",
    "conditional_probability",
    "decoherence_functional",
    "embed_gate",
    "entropy",
    "enumerate_tree",
    "from_ensemble",
    "from_pure",
    "history_content",
    "intermediate_entanglement_witness",
    "is_consistent_set",
    "is_product_history",
    "marginal_probability",
    "measure_update",
    "partial_probability_rho",
    "partial_sequence_probability",
    "reduce",
    "reduced_amplitude",
    "sample",
    "sequence_probability",
    "sequence_probability_rho",
    "state_at_final",
    "time_project",
    "unknown_result_update",
    "validate",
]

__version__ = "0.1.0"
