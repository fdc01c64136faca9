"""SWAG: a Gaussian over weights built from SGD iterates.

Collection keeps a running mean and second moment plus a FIFO of deviation
columns; sampling draws

    theta = mean + scale * (sqrt(diag) * z1 + D @ z2 / sqrt(2 (K-1)))

with diag = clamp(second_moment - mean^2, var_clamp) and K the number of
stored columns.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class SwagConfig:
    enabled: bool = True
    start_epoch: int = 5
    collect_every: int = 1
    max_rank: int = 20
    var_clamp: float = 1e-30
    scale: float = 1.0


class SwagState:
    def __init__(self, n_params: int, config: SwagConfig):
        self.config = config
        self.mean = np.zeros(n_params)
        self.sq_mean = np.zeros(n_params)
        self.deviations: list[np.ndarray] = []
        self.n_collected = 0


def should_collect(epoch: int, config: SwagConfig) -> bool:
    if epoch < config.start_epoch:
        return False
    return (epoch - config.start_epoch) % config.collect_every == 0


def swag_collect(state: SwagState, params: np.ndarray, epoch: int) -> bool:
    """Fold one iterate into the running moments if the schedule says so."""
    if not should_collect(epoch, state.config):
        return False
    n = state.n_collected
    state.mean = (state.mean * n + params) / (n + 1)
    state.sq_mean = (state.sq_mean * n + params**2) / (n + 1)
    state.deviations.append(params - state.mean)
    if len(state.deviations) > state.config.max_rank:
        state.deviations.pop(0)
    state.n_collected = n + 1
    return True


def swag_sample(state: SwagState, seed=0, scale: float | None = None) -> np.ndarray:
    """One parameter draw from the fitted Gaussian."""
    if state.n_collected < 2:
        raise ValueError(
            f"need at least 2 collected iterates to sample, have {state.n_collected}"
        )
    k = len(state.deviations)
    if k < 2:
        raise ValueError(f"need deviation rank >= 2 to sample, have {k}")
    if scale is None:
        scale = state.config.scale
    rng = np.random.default_rng(seed)
    diag = np.maximum(state.sq_mean - state.mean**2, state.config.var_clamp)
    z1 = rng.standard_normal(state.mean.size)
    z2 = rng.standard_normal(k)
    dev = np.stack(state.deviations, axis=1)  # P x K
    return state.mean + scale * (np.sqrt(diag) * z1 + dev @ z2 / np.sqrt(2.0 * (k - 1)))


def save_state(path, state: SwagState) -> None:
    """Checkpoint the moments, deviation columns and schedule config."""
    dev = (
        np.stack(state.deviations, axis=1)
        if state.deviations
        else np.zeros((state.mean.size, 0))
    )
    np.savez(
        path,
        version=1,
        mean=state.mean,
        sq_mean=state.sq_mean,
        deviations=dev,
        n_collected=state.n_collected,
        config=json.dumps(asdict(state.config), sort_keys=True),
    )


def load_state(path) -> SwagState:
    with np.load(path, allow_pickle=False) as doc:
        if int(doc["version"]) != 1:
            raise ValueError(f"unsupported checkpoint version {doc['version']}")
        config = SwagConfig(**json.loads(str(doc["config"])))
        state = SwagState(doc["mean"].size, config)
        state.mean = doc["mean"].copy()
        state.sq_mean = doc["sq_mean"].copy()
        dev = doc["deviations"]
        state.deviations = [dev[:, j].copy() for j in range(dev.shape[1])]
        state.n_collected = int(doc["n_collected"])
    return state


def swag_ensemble(model, data, state: SwagState, n_samples: int, seed: int = 0):
    """Deterministic-forward ensembles from n_samples weight draws."""
    from ..forecasts import EnsembleForecast

    if n_samples < 1:
        raise ValueError(f"need at least one sample, got {n_samples}")
    saved = model.params.copy()
    draws = np.empty((n_samples, len(data), model.horizon))
    try:
        for s in range(n_samples):
            model.params[:] = swag_sample(state, seed=(seed, s))
            draws[s] = model.forward(data.y_past, data.covariates, train=False)
    finally:
        model.params[:] = saved
    return [
        EnsembleForecast(int(origin), draws[:, i, :])
        for i, origin in enumerate(data.origins)
    ]
