"""Diebold-Mariano testing with a Newey-West long-run variance and the
forward feature-group selection loop built on top of it.

Conventions: the loss differential is d_t = loss_A(t) - loss_B(t), so a
positive mean favors B. The lag count follows the T^0.25 rule, the DM
statistic carries the Harvey small-sample adjustment with horizon proxy
h = m+1, and p-values come from a Student-t with T-1 degrees of freedom.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .scoring import ScoreSeries

log = logging.getLogger(__name__)


def newey_west_lrv(d: np.ndarray, m: int) -> float:
    """Bartlett-weighted HAC long-run variance of a loss differential.

    gamma_0 + 2 * sum_{j=1..m} (1 - j/(m+1)) * gamma_j, with gamma_j the
    population autocovariance at lag j; negative estimates floor at 0.
    """
    x = np.asarray(d, dtype=np.float64).reshape(-1)
    t = x.size
    if t < 2:
        raise ValueError("need at least two observations")
    if not 0 <= m < t:
        raise ValueError(f"lag count {m} outside [0, {t})")
    c = x - x.mean()
    lrv = float(c @ c) / t
    for j in range(1, m + 1):
        gamma = float(c[j:] @ c[:-j]) / t
        lrv += 2.0 * (1.0 - j / (m + 1.0)) * gamma
    return max(lrv, 0.0)


@dataclass(frozen=True)
class DmResult:
    statistic: float
    p_value: float
    reject: bool
    direction: int  # sign of mean(loss_A - loss_B); +1 means B had lower loss
    mean_delta: float
    t_count: int
    lag: int
    flag: str | None = None  # "degenerate-variance" | "no-decision"


def _values(loss) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(loss, ScoreSeries):
        return loss.values, loss.origins
    return np.asarray(loss, dtype=np.float64).reshape(-1), None


def dm_test(loss_a, loss_b, alpha: float = 0.05) -> DmResult:
    """Two-sided equal-predictive-accuracy test on aligned loss series.

    Accepts ScoreSeries (origins are checked for alignment) or plain
    arrays. A zero long-run variance short-circuits: nonzero mean rejects
    with p=0 and a degenerate-variance flag, zero mean yields no-decision.
    """
    a, org_a = _values(loss_a)
    b, org_b = _values(loss_b)
    if a.shape != b.shape:
        raise ValueError("loss series lengths differ")
    if org_a is not None and org_b is not None and not np.array_equal(org_a, org_b):
        raise ValueError("loss series origins are not aligned")
    t = a.size
    if t < 10:
        raise ValueError(f"need at least 10 aligned losses, got {t}")

    d = a - b
    d_bar = float(d.mean())
    m = int(math.floor(t**0.25))
    lrv = newey_west_lrv(d, m)
    if lrv == 0.0:
        if d_bar == 0.0:
            return DmResult(0.0, 1.0, False, 0, 0.0, t, m, flag="no-decision")
        return DmResult(
            math.copysign(math.inf, d_bar),
            0.0,
            True,
            int(np.sign(d_bar)),
            d_bar,
            t,
            m,
            flag="degenerate-variance",
        )

    dm = d_bar / math.sqrt(lrv / t)
    h = m + 1
    harvey = math.sqrt((t + 1 - 2 * h + h * (h - 1) / t) / t)
    dm *= harvey
    p = 2.0 * float(sstats.t.sf(abs(dm), df=t - 1))
    return DmResult(dm, p, p < alpha, int(np.sign(d_bar)), d_bar, t, m)


@dataclass
class SelectionResult:
    selected: tuple[str, ...]
    trail: list[dict] = field(default_factory=list)


def forward_select(
    runner,
    groups: tuple[str, ...] = ("R1", "R2", "R3", "R4", "R5"),
    base: tuple[str, ...] = ("calendar",),
    alpha: float = 0.05,
) -> SelectionResult:
    """Greedy group selection driven by DM tests on validation losses.

    ``runner(features)`` must return per-origin validation losses, aligned
    across calls and deterministic. Each step evaluates every unselected
    group added to the current set, adopts the significantly improving one
    with the largest mean loss reduction (ties break toward the earlier
    group in ``groups``), and stops when nothing significant remains. A
    failing candidate is skipped and recorded, never fatal.
    """
    current = tuple(base)
    current_losses = np.asarray(runner(current), dtype=np.float64)
    remaining = list(groups)
    order = {g: i for i, g in enumerate(groups)}
    trail: list[dict] = []
    step = 0
    while remaining:
        step += 1
        candidates = []
        for g in remaining:
            try:
                losses = np.asarray(runner(current + (g,)), dtype=np.float64)
            except Exception as exc:
                log.warning("candidate %s failed: %s", g, exc)
                trail.append(
                    {"step": step, "candidate": g, "error": str(exc), "adopted": False}
                )
                continue
            res = dm_test(current_losses, losses, alpha=alpha)
            trail.append(
                {
                    "step": step,
                    "candidate": g,
                    "dm_statistic": res.statistic,
                    "p_value": res.p_value,
                    "mean_delta": res.mean_delta,
                    "adopted": False,
                }
            )
            if res.reject and res.mean_delta > 0:
                candidates.append((res.mean_delta, -order[g], g, losses))
        if not candidates:
            break
        candidates.sort(key=lambda c: (c[0], c[1]), reverse=True)
        _, _, best, best_losses = candidates[0]
        for rec in trail:
            if rec["step"] == step and rec["candidate"] == best:
                rec["adopted"] = True
        current = current + (best,)
        current_losses = best_losses
        remaining.remove(best)
    return SelectionResult(selected=current, trail=trail)


def save_trail(path, result: SelectionResult) -> None:
    """Audit trail JSON: the ordered DM evaluations plus the final set."""
    doc = {"selected": list(result.selected), "trail": result.trail}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
