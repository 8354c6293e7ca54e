"""Blind QAM equalization with stochastic, steepest-descent and fixed-point MMA2-2."""
from .channel import ChannelModel, NoiseSpec, builtin_channel, regressor, transmit
from .constellation import Constellation, dispersion_constant, draw_symbols, make_square_qam
from .equalizer import (
    DivergenceError,
    center_spike,
    equalize,
    fp_fixed_point_raw,
    fp_solve,
    fp_stabilized_step,
    kron_gradient_34,
    mma_stochastic_step,
    per_sample_identity_rhs,
    sd_gradient,
    sd_step,
    SdState,
)
from .estimators import FPMMAEqualizer, MMAEqualizer, SDMMAEqualizer
from .metrics import combined_response, isi_ensemble_db, isi_ratio
from .tensorops import ForgettingPolicy, MomentSet, batch_moments, update_moments

__version__ = "0.1.0"

__all__ = [
    "batch_moments",
    "builtin_channel",
    "center_spike",
    "ChannelModel",
    "combined_response",
    "Constellation",
    "dispersion_constant",
    "DivergenceError",
    "draw_symbols",
    "equalize",
    "ForgettingPolicy",
    "fp_fixed_point_raw",
    "fp_solve",
    "fp_stabilized_step",
    "FPMMAEqualizer",
    "isi_ensemble_db",
    "isi_ratio",
    "kron_gradient_34",
    "make_square_qam",
    "mma_stochastic_step",
    "MMAEqualizer",
    "MomentSet",
    "NoiseSpec",
    "per_sample_identity_rhs",
    "regressor",
    "sd_gradient",
    "sd_step",
    "SDMMAEqualizer",
    "SdState",
    "transmit",
    "update_moments",
]
