"""Gaussian simulation of QND-probed spin ensembles and Leggett-Garg tests."""
from .errors import DomainError, ParameterError, QndLgError, SequencingError
from .gaussian_dynamics import (
    CollectiveState,
    PhysicalParams,
    init_state,
    loss_update,
    pulse_step,
    qnd_update,
    readout_cov,
    rotate,
)
from .lgi_metrics import LgiResult, MeasurementRecord, corr_sign, k3_triple, k_n, pairwise_correlators
from .protocol import (
    SequenceSpec,
    correlator_table,
    disturbance_audit,
    evaluate_lgi,
    optimize_triple,
    run_sequence,
    sweep_theta,
    sweep_triple,
)

__version__ = "0.1.0"
