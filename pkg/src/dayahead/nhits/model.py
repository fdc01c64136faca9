"""NHITS backbone: doubly-residual multi-rate blocks over a flat parameter
vector, with hand-written reverse-mode differentiation.

Block b with pool kernel k and rate r:
  pool the running backcast to ceil(C/k) values, concatenate the flattened
  covariates, push through an MLP (ReLU + dropout), emit theta, split it
  into ceil(C/r) backcast and ceil(H/r) forecast knots, interpolate both to
  full length, subtract the backcast from the running input and add the
  forecast to the accumulator.

Keeping every weight in one contiguous float64 vector makes the optimizer,
gradient clipping, SWAG statistics and exact checkpointing one-liners.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..windows import CONTEXT, HORIZON, SampleWindow
from . import layers as L


@dataclass(frozen=True)
class NhitsConfig:
    n_blocks: tuple[int, ...] = (2, 2)
    mlp_units: tuple[tuple[int, ...], ...] = ((16, 16), (16, 16))
    dropout_prob_theta: float = 0.1
    n_pool_kernel_size: tuple[int, ...] = (4, 2)
    n_freq_downsample: tuple[int, ...] = (4, 2)
    lr: float = 1e-3
    warmup_epochs: int = 2
    n_epochs: int = 100
    batch_size: int = 128
    gradient_clip: float = 1.0
    seed: int = 0
    pool_mode: str = "avg"  # "avg" | "max"
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    patience: int = 10

    def __post_init__(self):
        n = len(self.n_blocks)
        for name in ("mlp_units", "n_pool_kernel_size", "n_freq_downsample"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have one entry per stack ({n})")
        if any(k < 1 for k in self.n_pool_kernel_size):
            raise ValueError("pool kernels must be >= 1")
        if any(r < 1 for r in self.n_freq_downsample):
            raise ValueError("downsample factors must be >= 1")
        if self.pool_mode not in ("avg", "max"):
            raise ValueError(f"unknown pool_mode {self.pool_mode!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_blocks": list(self.n_blocks),
                "mlp_units": [list(u) for u in self.mlp_units],
                "dropout_prob_theta": self.dropout_prob_theta,
                "n_pool_kernel_size": list(self.n_pool_kernel_size),
                "n_freq_downsample": list(self.n_freq_downsample),
                "lr": self.lr,
                "warmup_epochs": self.warmup_epochs,
                "n_epochs": self.n_epochs,
                "batch_size": self.batch_size,
                "gradient_clip": self.gradient_clip,
                "seed": self.seed,
                "pool_mode": self.pool_mode,
                "weight_decay": self.weight_decay,
                "betas": list(self.betas),
                "patience": self.patience,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NhitsConfig":
        doc = json.loads(text)
        return cls(
            n_blocks=tuple(doc["n_blocks"]),
            mlp_units=tuple(tuple(u) for u in doc["mlp_units"]),
            dropout_prob_theta=doc["dropout_prob_theta"],
            n_pool_kernel_size=tuple(doc["n_pool_kernel_size"]),
            n_freq_downsample=tuple(doc["n_freq_downsample"]),
            lr=doc["lr"],
            warmup_epochs=doc["warmup_epochs"],
            n_epochs=doc["n_epochs"],
            batch_size=doc["batch_size"],
            gradient_clip=doc["gradient_clip"],
            seed=doc["seed"],
            pool_mode=doc["pool_mode"],
            weight_decay=doc["weight_decay"],
            betas=tuple(doc["betas"]),
            patience=doc["patience"],
        )


@dataclass
class NhitsData:
    """Model-ready tensors assembled from masked, standardized windows."""

    origins: np.ndarray
    y_past: np.ndarray  # N x C
    covariates: np.ndarray  # N x (C*dk + C*du + H*dk), pre-flattened
    targets: np.ndarray | None  # N x H
    known_names: tuple[str, ...]
    unknown_names: tuple[str, ...]

    def __len__(self) -> int:
        return self.origins.size


def assemble_data(windows: list[SampleWindow]) -> NhitsData:
    """Split window columns into the four model tensors and flatten.

    Fully known columns (calendar, week-lag proxies) contribute their past
    rows and their horizon rows; market-dependent columns contribute their
    masked past rows only; the price past is its own tensor.
    """
    if not windows:
        raise ValueError("no windows to assemble")
    w0 = windows[0]
    names = w0.feature_names
    known = tuple(
        n for j, n in enumerate(names) if n != "price" and w0.known_mask[:, j].all()
    )
    unknown = tuple(
        n for j, n in enumerate(names) if n != "price" and n not in known
    )
    jk = [names.index(n) for n in known]
    ju = [names.index(n) for n in unknown]

    origins, y_past, cov, targets = [], [], [], []
    for w in windows:
        if w.feature_names != names:
            raise ValueError("windows disagree on feature layout")
        origins.append(w.origin)
        y_past.append(w.inputs[:, 0])
        parts = [w.inputs[:, jk].ravel(), w.inputs[:, ju].ravel(), w.future[:, jk].ravel()]
        cov.append(np.concatenate(parts))
        targets.append(w.target)
    return NhitsData(
        np.array(origins, dtype=np.int64),
        np.stack(y_past),
        np.stack(cov),
        np.stack(targets),
        known,
        unknown,
    )


class NumericError(FloatingPointError):
    """Non-finite activations, annotated with the offending block."""


@dataclass
class _BlockSpec:
    kernel: int
    rate: int
    hidden: tuple[int, ...]
    n_backcast: int
    n_forecast: int
    weights: list[tuple[slice, tuple[int, int]]] = field(default_factory=list)
    biases: list[slice] = field(default_factory=list)
    interp_back: np.ndarray | None = None
    interp_fore: np.ndarray | None = None


class NhitsModel:
    """Flat-parameter NHITS with reverse-mode gradients.

    ``context``/``horizon`` default to the production 168/24 geometry but
    stay configurable so toy models remain hand-checkable.
    """

    def __init__(
        self,
        config: NhitsConfig,
        d_known: int,
        d_unknown: int,
        context: int = CONTEXT,
        horizon: int = HORIZON,
    ):
        self.config = config
        self.context = context
        self.horizon = horizon
        self.d_known = d_known
        self.d_unknown = d_unknown
        self.cov_dim = context * (d_known + d_unknown) + horizon * d_known
        self.best_val_mae = math.inf
        self.trained_epochs = 0

        self.blocks: list[_BlockSpec] = []
        cursor = 0
        shapes: list[tuple[slice, tuple[int, int] | tuple[int]]] = []

        def alloc(shape):
            nonlocal cursor
            size = int(np.prod(shape))
            sl = slice(cursor, cursor + size)
            cursor += size
            shapes.append((sl, shape))
            return sl

        for s, n_blocks in enumerate(config.n_blocks):
            kernel = config.n_pool_kernel_size[s]
            rate = config.n_freq_downsample[s]
            pooled = math.ceil(context / kernel)
            nb = math.ceil(context / rate)
            nf = math.ceil(horizon / rate)
            for _ in range(n_blocks):
                spec = _BlockSpec(kernel, rate, tuple(config.mlp_units[s]), nb, nf)
                d_in = pooled + self.cov_dim
                for width in spec.hidden:
                    spec.weights.append((alloc((d_in, width)), (d_in, width)))
                    spec.biases.append(alloc((width,)))
                    d_in = width
                spec.weights.append((alloc((d_in, nb + nf)), (d_in, nb + nf)))
                spec.biases.append(alloc((nb + nf,)))
                spec.interp_back = L.interp_matrix(context, nb)
                spec.interp_fore = L.interp_matrix(horizon, nf)
                self.blocks.append(spec)

        self.n_params = cursor
        self._shapes = shapes
        self.params = np.zeros(cursor)
        self.init_weights(config.seed)

    def init_weights(self, seed: int) -> None:
        """uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer, biases too."""
        rng = np.random.default_rng(seed)
        for spec in self.blocks:
            for (w_sl, (fan_in, fan_out)), b_sl in zip(spec.weights, spec.biases):
                bound = 1.0 / math.sqrt(fan_in)
                self.params[w_sl] = rng.uniform(-bound, bound, fan_in * fan_out)
                self.params[b_sl] = rng.uniform(-bound, bound, fan_out)

    def _weight(self, spec_entry):
        sl, shape = spec_entry
        return self.params[sl].reshape(shape)

    def _pool(self, x: np.ndarray, kernel: int):
        if self.config.pool_mode == "max":
            return L.maxpool_forward(x, kernel)
        return L.avgpool_forward(x, kernel), None

    def forward(
        self,
        y_past: np.ndarray,
        covariates: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
        keep_cache: bool = False,
    ):
        """Point forecast (B x horizon); optionally retains the caches the
        backward pass needs."""
        if covariates.shape[1] != self.cov_dim:
            raise ValueError(
                f"covariates have {covariates.shape[1]} columns, expected {self.cov_dim}"
            )
        if train and self.config.dropout_prob_theta > 0 and rng is None:
            raise ValueError("training-mode dropout needs an rng")
        residual = y_past
        acc = np.zeros((y_past.shape[0], self.horizon))
        caches = []
        for bi, spec in enumerate(self.blocks):
            pooled, pool_arg = self._pool(residual, spec.kernel)
            z = np.concatenate([pooled, covariates], axis=1)
            a = z
            layer_cache = []
            for li in range(len(spec.hidden)):
                w = self._weight(spec.weights[li])
                s = L.dense_forward(a, w, self.params[spec.biases[li]])
                r = L.relu_forward(s)
                if train and self.config.dropout_prob_theta > 0:
                    mask = L.dropout_mask(rng, r.shape, self.config.dropout_prob_theta)
                else:
                    mask = None
                layer_cache.append((a, s, mask))
                a = r if mask is None else r * mask
            theta = L.dense_forward(
                a, self._weight(spec.weights[-1]), self.params[spec.biases[-1]]
            )
            if not np.all(np.isfinite(theta)):
                raise NumericError(f"non-finite activations in block {bi}")
            backcast = theta[:, : spec.n_backcast] @ spec.interp_back.T
            forecast = theta[:, spec.n_backcast :] @ spec.interp_fore.T
            if keep_cache:
                caches.append((residual, pool_arg, layer_cache, a))
            residual = residual - backcast
            acc = acc + forecast
        if keep_cache:
            return acc, caches
        return acc

    def backward(self, g_out: np.ndarray, caches) -> np.ndarray:
        """Gradient of a scalar loss wrt the flat parameter vector, given
        dLoss/dforecast and the forward caches."""
        grad = np.zeros_like(self.params)
        g_residual = np.zeros((g_out.shape[0], self.context))
        for bi in range(len(self.blocks) - 1, -1, -1):
            spec = self.blocks[bi]
            residual_in, pool_arg, layer_cache, a_last = caches[bi]
            g_theta = np.concatenate(
                [-(g_residual @ spec.interp_back), g_out @ spec.interp_fore], axis=1
            )
            g_a, g_w, g_b = L.dense_backward(
                g_theta, a_last, self._weight(spec.weights[-1])
            )
            grad[spec.weights[-1][0]] += g_w.ravel()
            grad[spec.biases[-1]] += g_b
            for li in range(len(spec.hidden) - 1, -1, -1):
                a_in, s, mask = layer_cache[li]
                if mask is not None:
                    g_a = g_a * mask
                g_s = L.relu_backward(g_a, s)
                g_a, g_w, g_b = L.dense_backward(
                    g_s, a_in, self._weight(spec.weights[li])
                )
                grad[spec.weights[li][0]] += g_w.ravel()
                grad[spec.biases[li]] += g_b
            g_pooled = g_a[:, : g_a.shape[1] - self.cov_dim]
            if self.config.pool_mode == "max":
                g_from_pool = L.maxpool_backward(g_pooled, pool_arg, self.context)
            else:
                g_from_pool = L.avgpool_backward(g_pooled, self.context, spec.kernel)
            g_residual = g_residual + g_from_pool
        return grad

    def loss_and_grad(
        self,
        y_past: np.ndarray,
        covariates: np.ndarray,
        targets: np.ndarray,
        train: bool = True,
        rng: np.random.Generator | None = None,
    ) -> tuple[float, np.ndarray]:
        """Mean absolute error over the batch and its parameter gradient."""
        out, caches = self.forward(y_past, covariates, train=train, rng=rng, keep_cache=True)
        diff = out - targets
        loss = float(np.abs(diff).mean())
        g_out = np.sign(diff) / diff.size
        return loss, self.backward(g_out, caches)

    def predict(self, data: NhitsData) -> np.ndarray:
        return self.forward(data.y_past, data.covariates, train=False)

    def clone_params(self) -> np.ndarray:
        return self.params.copy()

    def save(self, path, standardizer=None) -> None:
        """Exact binary checkpoint: config, geometry, weights, optionally
        the fitted standardizer."""
        extra = {}
        if standardizer is not None:
            extra = {
                "std_mean": standardizer.mean,
                "std_std": standardizer.std,
                "std_columns": json.dumps(list(standardizer.column_names)),
            }
        np.savez(
            path,
            version=1,
            config=self.config.to_json(),
            context=self.context,
            horizon=self.horizon,
            d_known=self.d_known,
            d_unknown=self.d_unknown,
            params=self.params,
            best_val_mae=self.best_val_mae,
            trained_epochs=self.trained_epochs,
            **extra,
        )

    @classmethod
    def load(cls, path):
        """Returns (model, standardizer-or-None)."""
        from ..windows import Standardizer

        with np.load(path, allow_pickle=False) as doc:
            config = NhitsConfig.from_json(str(doc["config"]))
            model = cls(
                config,
                d_known=int(doc["d_known"]),
                d_unknown=int(doc["d_unknown"]),
                context=int(doc["context"]),
                horizon=int(doc["horizon"]),
            )
            model.params[:] = doc["params"]
            model.best_val_mae = float(doc["best_val_mae"])
            model.trained_epochs = int(doc["trained_epochs"])
            std = None
            if "std_mean" in doc:
                std = Standardizer(
                    doc["std_mean"].copy(),
                    doc["std_std"].copy(),
                    tuple(json.loads(str(doc["std_columns"]))),
                )
        return model, std
