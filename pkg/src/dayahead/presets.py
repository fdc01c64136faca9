"""Shipped model configurations.

Three sizes (tiny, small, base), each in a default and a tuned variant.
The tuned variants came out of a hyperparameter search that is not part of
this package; only its results are shipped. The base default declares four
MLP blocks per stack against three stacks; the extra block spec is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

from .nhits import NhitsConfig, SwagConfig
from .qra import QraOptions, QraSolverConfig


@dataclass(frozen=True)
class Preset:
    """Everything one training run needs beyond the data."""

    name: str
    nhits: NhitsConfig
    swag: SwagConfig
    n_mc_samples: int
    quantile_levels: tuple[float, ...]
    lambda_grid: tuple[float, ...]
    qra_options: QraOptions
    qra_solver: QraSolverConfig
    subsample_stride: int
    n_target_levels: int = 200


_Q5 = (0.01, 0.10, 0.50, 0.90, 0.99)
_Q9 = (0.01, 0.03, 0.05, 0.10, 0.50, 0.90, 0.95, 0.97, 0.99)

_SWAG_DEFAULT = SwagConfig(
    enabled=True, start_epoch=5, collect_every=1, max_rank=20,
    var_clamp=1e-30, scale=1.0,
)
_SWAG_TUNED = SwagConfig(
    enabled=True, start_epoch=5, collect_every=4, max_rank=10,
    var_clamp=1e-30, scale=0.5,
)


def _nhits(blocks, units, dropout, pool, down, lr):
    return NhitsConfig(
        n_blocks=blocks,
        mlp_units=units,
        dropout_prob_theta=dropout,
        n_pool_kernel_size=pool,
        n_freq_downsample=down,
        lr=lr,
        warmup_epochs=2,
        n_epochs=100,
        batch_size=128,
        gradient_clip=1.0,
        seed=0,
    )


PRESETS: dict[str, Preset] = {
    "tiny-default": Preset(
        name="tiny-default",
        nhits=_nhits((2, 2), ((16, 16), (16, 16)), 0.1, (4, 2), (4, 2), 1e-3),
        swag=_SWAG_DEFAULT,
        n_mc_samples=64,
        quantile_levels=_Q5,
        lambda_grid=(0.0, 1e-4, 1e-3),
        qra_options=QraOptions(use_pca=True, pca_var=0.95, sample_k=0),
        qra_solver=QraSolverConfig(n_epochs=200, batch_size=512, lr=1e-4, patience=10),
        subsample_stride=4,
    ),
    "small-default": Preset(
        name="small-default",
        nhits=_nhits(
            (2, 2, 2), ((96, 96), (96, 96), (96, 96)), 0.1, (4, 2, 1), (4, 2, 1), 1e-3
        ),
        swag=_SWAG_DEFAULT,
        n_mc_samples=128,
        quantile_levels=_Q9,
        lambda_grid=(0.0, 1e-4, 1e-3),
        qra_options=QraOptions(use_pca=True, pca_var=0.95, sample_k=0),
        qra_solver=QraSolverConfig(n_epochs=200, batch_size=512, lr=1e-4, patience=20),
        subsample_stride=2,
    ),
    "base-default": Preset(
        name="base-default",
        nhits=_nhits(
            (3, 3, 3),
            ((256, 256, 256), (256, 256, 256), (256, 256, 256)),
            0.1,
            (4, 2, 1),
            (4, 2, 1),
            1e-3,
        ),
        swag=_SWAG_DEFAULT,
        n_mc_samples=512,
        quantile_levels=_Q9,
        lambda_grid=(0.0, 1e-4, 1e-3),
        qra_options=QraOptions(use_pca=True, pca_var=0.95, sample_k=0),
        qra_solver=QraSolverConfig(n_epochs=200, batch_size=1024, lr=1e-4, patience=20),
        subsample_stride=1,
    ),
    "tiny-tuned": Preset(
        name="tiny-tuned",
        nhits=_nhits((1, 1), ((32, 32), (32, 32)), 0.154, (2, 2), (2, 2), 5.552e-5),
        swag=SwagConfig(enabled=False),
        n_mc_samples=8,
        quantile_levels=_Q5,
        lambda_grid=(0.0, 1e-3),
        qra_options=QraOptions(use_pca=False, sample_k=1),
        qra_solver=QraSolverConfig(n_epochs=200, batch_size=512, lr=1.02e-4, patience=10),
        subsample_stride=2,
    ),
    "small-tuned": Preset(
        name="small-tuned",
        nhits=_nhits(
            (2, 2, 2, 2),
            ((96, 96), (96, 96), (96, 96), (96, 96)),
            0.141,
            (8, 4, 2, 2),
            (4, 2, 2, 1),
            1.1929e-4,
        ),
        swag=_SWAG_TUNED,
        n_mc_samples=48,
        quantile_levels=_Q9,
        lambda_grid=(0.0, 1e-3),
        qra_options=QraOptions(use_pca=False, sample_k=1),
        qra_solver=QraSolverConfig(n_epochs=200, batch_size=1024, lr=1.6597e-4, patience=20),
        subsample_stride=2,
    ),
    "base-tuned": Preset(
        name="base-tuned",
        nhits=_nhits(
            (2, 2, 2, 2),
            ((256, 256, 256), (256, 256, 256), (256, 256, 256), (256, 256, 256)),
            0.1183,
            (16, 8, 4, 2),
            (16, 8, 4, 2),
            6.1802e-5,
        ),
        swag=_SWAG_TUNED,
        n_mc_samples=128,
        quantile_levels=_Q9,
        lambda_grid=(0.0, 1e-4, 1e-3),
        qra_options=QraOptions(use_pca=False, sample_k=1),
        qra_solver=QraSolverConfig(n_epochs=100, batch_size=256, lr=9.16241e-5, patience=30),
        subsample_stride=1,
    ),
}


def get_preset(name: str) -> Preset:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; available: {known}")
    return PRESETS[name]
