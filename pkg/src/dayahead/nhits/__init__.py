from .model import NhitsConfig, NhitsData, NhitsModel, NumericError, assemble_data
from .swag import (
    SwagConfig,
    SwagState,
    load_state,
    save_state,
    should_collect,
    swag_collect,
    swag_ensemble,
    swag_sample,
)
from .train import AdamW, TrainReport, learning_rate, mc_dropout_ensemble, nhits_train

__all__ = [
    "AdamW",
    "NhitsConfig",
    "NhitsData",
    "NhitsModel",
    "NumericError",
    "SwagConfig",
    "SwagState",
    "TrainReport",
    "assemble_data",
    "learning_rate",
    "load_state",
    "mc_dropout_ensemble",
    "nhits_train",
    "save_state",
    "should_collect",
    "swag_collect",
    "swag_ensemble",
    "swag_sample",
]
