"""Quantile Regression Averaging head.

Turns ensembles of stochastic point forecasts plus known covariates into
calibrated quantile forecasts: per-(horizon, level) linear pinball-LASSO
models, pool-adjacent-violators repair of quantile crossings, and linear
interpolation onto a dense uniform level grid.

The solver is plain mini-batch subgradient descent on the pinball loss with
decoupled soft-thresholding of the coefficients (never the intercept),
which keeps exact zeros under the L1 penalty and stays deterministic under
a seed. The intercept starts at the empirical train quantile, so the
intercept-only solution is the starting point rather than a distant target.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .forecasts import QuantileForecast
from .windows import CONTEXT, SampleWindow

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PcaState:
    """Column-centered principal axes of the draw block for one horizon."""

    mean: np.ndarray
    components: np.ndarray  # n_components x n_draws
    explained: float

    def transform(self, draws: np.ndarray) -> np.ndarray:
        return (draws - self.mean) @ self.components.T


def fit_pca(draws: np.ndarray, pca_var: float) -> PcaState:
    """Smallest component count whose explained variance reaches pca_var."""
    mean = draws.mean(axis=0)
    centered = draws - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    var = svals**2
    total = var.sum()
    if total == 0.0:
        return PcaState(mean, vt[:1] * 0.0, 1.0)
    ratio = np.cumsum(var) / total
    k = int(np.searchsorted(ratio, pca_var - 1e-12) + 1)
    return PcaState(mean, vt[:k], float(ratio[k - 1]))


@dataclass(frozen=True)
class QraOptions:
    use_mean_sd: bool = False
    use_pca: bool = False
    pca_var: float = 0.95
    sample_k: int = 0  # 0 or 1 keeps every draw; k>=2 keeps every k-th
    subsample_stride: int = 1  # keep every stride-th training row


@dataclass
class QraDesign:
    """Per-horizon design matrices with column provenance."""

    origins: np.ndarray
    matrices: list[np.ndarray]  # 24 entries, each N x F_h
    labels: list[list[str]]
    targets: np.ndarray | None  # N x 24 when known
    pca: list[PcaState | None]

    def __post_init__(self):
        n = self.origins.size
        for h, (x, lab) in enumerate(zip(self.matrices, self.labels)):
            if x.shape[0] != n:
                raise ValueError(f"horizon {h}: {x.shape[0]} rows, expected {n}")
            if x.shape[1] != len(lab):
                raise ValueError(f"horizon {h}: labels do not cover every column")


def build_design(
    ensembles: list,
    windows: list[SampleWindow],
    options: QraOptions = QraOptions(),
    static: np.ndarray | None = None,
    pca_state: list[PcaState | None] | None = None,
) -> QraDesign:
    """Assemble [draws | mean? | sd? | future-known covariates | static?].

    Ensembles and windows must align one-to-one by origin. With use_pca the
    draw block is replaced by its principal-component scores; the basis is
    fitted on the rows at hand (training) unless ``pca_state`` replays a
    fitted one (prediction). Mean/SD columns are computed from the raw
    draws before any PCA or draw subsetting.
    """
    if len(ensembles) != len(windows):
        raise ValueError(f"{len(ensembles)} ensembles vs {len(windows)} windows")
    for e, w in zip(ensembles, windows):
        if e.origin != w.origin:
            raise ValueError(f"misaligned origins: ensemble {e.origin} vs window {w.origin}")
    if not ensembles:
        raise ValueError("empty design")
    s = ensembles[0].size
    for e in ensembles:
        if e.size != s:
            raise ValueError("ensembles disagree on sample count")

    keep = slice(None) if options.sample_k <= 1 else slice(0, None, options.sample_k)
    origins = np.array([w.origin for w in windows], dtype=np.int64)
    n = origins.size

    # future-known covariate columns shared by all windows
    w0 = windows[0]
    known_cols = [
        j
        for j, name in enumerate(w0.feature_names)
        if name != "price" and w0.known_mask[CONTEXT:, j].all()
    ]
    cov_names = [w0.feature_names[j] for j in known_cols]

    matrices, labels, pca_out = [], [], []
    targets = np.stack([w.target for w in windows]) if windows else None
    for h in range(24):
        draws = np.stack([e.samples[:, h] for e in ensembles])  # N x S
        blocks, labs = [], []
        sub = draws[:, keep]
        if options.use_pca:
            state = pca_state[h] if pca_state is not None else fit_pca(sub, options.pca_var)
            blocks.append(state.transform(sub))
            labs += [f"pc_{i}" for i in range(blocks[-1].shape[1])]
            pca_out.append(state)
        else:
            blocks.append(sub)
            labs += [f"draw_{i}" for i in range(sub.shape[1])]
            pca_out.append(None)
        if options.use_mean_sd:
            blocks.append(draws.mean(axis=1, keepdims=True))
            blocks.append(draws.std(axis=1, keepdims=True))
            labs += ["mean", "sd"]
        if known_cols:
            cov = np.stack([w.future[h, known_cols] for w in windows])
            blocks.append(cov)
            labs += [f"cov_{name}" for name in cov_names]
        if static is not None:
            if static.shape[0] != n:
                raise ValueError("static features must align with rows")
            blocks.append(static)
            labs += [f"static_{i}" for i in range(static.shape[1])]
        matrices.append(np.concatenate(blocks, axis=1))
        labels.append(labs)
    return QraDesign(origins, matrices, labels, targets, pca_out)


def subsample_rows(design: QraDesign, stride: int) -> QraDesign:
    """Keep every stride-th training row (thins overlapping windows)."""
    if stride <= 1:
        return design
    idx = np.arange(0, design.origins.size, stride)
    return QraDesign(
        design.origins[idx],
        [x[idx] for x in design.matrices],
        design.labels,
        None if design.targets is None else design.targets[idx],
        design.pca,
    )


@dataclass(frozen=True)
class QraSolverConfig:
    n_epochs: int = 200
    batch_size: int = 512
    lr: float = 1e-4
    patience: int = 10
    val_fraction: float = 0.2
    seed: int = 0


@dataclass
class QraModel:
    levels: np.ndarray
    coef: list[list[np.ndarray]]  # [h][q] -> F_h vector
    intercept: np.ndarray  # 24 x Q
    lambdas: np.ndarray  # 24 x Q
    labels: list[list[str]]
    pca: list[PcaState | None]
    history: dict = field(default_factory=dict)


def pinball(y: np.ndarray, pred: np.ndarray, tau: float) -> float:
    u = y - pred
    return float(np.mean(np.maximum(tau * u, (tau - 1.0) * u)))


def _fit_one(x, y, tau, lam, cfg: QraSolverConfig, rng):
    """Subgradient descent for one (horizon, level, lambda) cell.

    Returns (beta, b, checkpoint val losses, converged flag).
    """
    n = x.shape[0]
    n_val = max(1, int(round(n * cfg.val_fraction)))
    if n - n_val < 1:
        n_val = n - 1
    xt, yt = x[: n - n_val], y[: n - n_val]
    xv, yv = x[n - n_val :], y[n - n_val :]

    beta = np.zeros(x.shape[1])
    b = float(np.quantile(yt, tau))
    best = (beta.copy(), b)
    best_val = pinball(yv, xv @ beta + b, tau)
    checkpoints = [best_val]
    patience = cfg.patience
    converged = False
    for _ in range(cfg.n_epochs):
        order = rng.permutation(n - n_val)
        for lo in range(0, order.size, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            xb, yb = xt[idx], yt[idx]
            u = yb - xb @ beta - b
            g = tau - (u < 0)
            beta += cfg.lr * (xb.T @ g) / idx.size
            b += cfg.lr * g.mean()
            if lam > 0:
                beta = np.sign(beta) * np.maximum(np.abs(beta) - cfg.lr * lam, 0.0)
        val = pinball(yv, xv @ beta + b, tau)
        if val < best_val - 1e-12:
            best_val = val
            best = (beta.copy(), b)
            checkpoints.append(val)
            patience = cfg.patience
        else:
            patience -= 1
            if patience <= 0:
                converged = True
                break
    return best[0], best[1], checkpoints, converged


def fit_quantile_lasso(
    design: QraDesign,
    levels,
    lambda_grid=(0.0, 1e-4, 1e-3),
    cfg: QraSolverConfig = QraSolverConfig(),
) -> QraModel:
    """One pinball-LASSO fit per (horizon, level).

    Each cell tries every lambda on the grid and keeps the one with the
    lowest validation pinball (the trailing val_fraction of rows, in time
    order). Runs that exhaust n_epochs while still improving are kept with
    a warning.
    """
    levels = np.asarray(sorted(levels), dtype=np.float64)
    if np.any((levels <= 0) | (levels >= 1)):
        raise ValueError("quantile levels must lie strictly inside (0,1)")
    if design.targets is None:
        raise ValueError("design has no targets; build it from training windows")
    if design.origins.size < 2:
        raise ValueError("need at least 2 rows per horizon")

    coef, intercept = [], np.zeros((24, levels.size))
    lambdas = np.zeros((24, levels.size))
    history = {}
    for h in range(24):
        x = design.matrices[h]
        y = design.targets[:, h]
        coef_h = []
        for q, tau in enumerate(levels):
            best = None
            for li, lam in enumerate(sorted(lambda_grid)):
                rng = np.random.default_rng((cfg.seed, h, q, li))
                beta, b, checkpoints, converged = _fit_one(x, y, tau, lam, cfg, rng)
                if not converged:
                    log.warning(
                        "h=%d tau=%.3f lambda=%g: still improving at epoch budget; keeping best iterate",
                        h, tau, lam,
                    )
                val = checkpoints[-1]
                if best is None or val < best[0]:
                    best = (val, lam, beta, b, checkpoints)
            val, lam, beta, b, checkpoints = best
            coef_h.append(beta)
            intercept[h, q] = b
            lambdas[h, q] = lam
            history[(h, float(tau))] = {"lambda": lam, "checkpoints": checkpoints, "val_pinball": val}
        coef.append(coef_h)
    return QraModel(levels, coef, intercept, lambdas, design.labels, design.pca, history)


def predict_quantiles(model: QraModel, design: QraDesign) -> np.ndarray:
    """Raw (possibly crossing) quantile values, N x 24 x Q."""
    n = design.origins.size
    out = np.empty((n, 24, model.levels.size))
    for h in range(24):
        x = design.matrices[h]
        if x.shape[1] != len(model.labels[h]):
            raise ValueError(
                f"horizon {h}: design has {x.shape[1]} columns, model expects {len(model.labels[h])}"
            )
        for q in range(model.levels.size):
            out[:, h, q] = x @ model.coef[h][q] + model.intercept[h, q]
    return out


def isotonic_repair(values: np.ndarray) -> np.ndarray:
    """L2 projection onto non-decreasing sequences (pool adjacent
    violators, uniform weights). Idempotent and mean-preserving."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("nothing to repair")
    means = []  # block stack: (mean, count)
    for x in v:
        means.append((float(x), 1))
        while len(means) > 1 and means[-2][0] > means[-1][0]:
            m2, c2 = means.pop()
            m1, c1 = means.pop()
            means.append(((m1 * c1 + m2 * c2) / (c1 + c2), c1 + c2))
    return np.concatenate([np.full(c, m) for m, c in means])


def interpolate_quantiles(fc: QuantileForecast, n_levels: int = 200) -> QuantileForecast:
    """Linear interpolation in the level-value plane onto the uniform grid
    {(i+0.5)/n : i=0..n-1}; levels beyond the fitted range take the
    outermost fitted value (flat extrapolation)."""
    if not fc.is_monotone:
        raise ValueError("quantile values cross; run isotonic repair first")
    grid = (np.arange(n_levels) + 0.5) / n_levels
    values = np.empty((n_levels, 24))
    for h in range(24):
        values[:, h] = np.interp(grid, fc.levels, fc.values[:, h])
    return QuantileForecast(fc.origin, grid, values)


def qra_forecast(
    model: QraModel, design: QraDesign, interpolate_to: int | None = 200
) -> list[QuantileForecast]:
    """Predict, repair crossings per (origin, horizon), then densify.

    The monotonicity of every emitted forecast is a hard assertion.
    """
    raw = predict_quantiles(model, design)
    out = []
    for i, origin in enumerate(design.origins):
        vals = np.stack([isotonic_repair(raw[i, h]) for h in range(24)], axis=1)
        fc = QuantileForecast(int(origin), model.levels, vals)
        if interpolate_to:
            fc = interpolate_quantiles(fc, interpolate_to)
        assert fc.is_monotone, "quantile crossing after isotonic repair"
        out.append(fc)
    return out


def save_model(path, model: QraModel) -> None:
    """JSON round trip of everything needed to predict."""
    doc = {
        "levels": model.levels.tolist(),
        "labels": model.labels,
        "lambdas": model.lambdas.tolist(),
        "intercept": model.intercept.tolist(),
        "coef": [[beta.tolist() for beta in per_h] for per_h in model.coef],
        "pca": [
            None
            if p is None
            else {
                "mean": p.mean.tolist(),
                "components": p.components.tolist(),
                "explained": p.explained,
            }
            for p in model.pca
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> QraModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    pca = [
        None
        if p is None
        else PcaState(np.array(p["mean"]), np.array(p["components"]), p["explained"])
        for p in doc["pca"]
    ]
    return QraModel(
        np.array(doc["levels"]),
        [[np.array(beta) for beta in per_h] for per_h in doc["coef"]],
        np.array(doc["intercept"]),
        np.array(doc["lambdas"]),
        doc["labels"],
        pca,
    )
