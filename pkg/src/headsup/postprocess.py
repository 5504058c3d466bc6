"""Strategy post-processing: probability thresholding and purification.

Thresholding zeroes low-probability actions and renormalizes, trimming the
noise tail a sampled-regret average carries; purification collapses to the
modal action outright.  Both operate per information set.  The module also
ships the randomized matrix-game experiment that measures what purification
does to abstracted equilibria against an exact opponent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .seqform import solve_matrix_game
from .strategy import StrategyTable


class PostProcessError(ValueError):
    """Raised for invalid thresholds or schedules."""


def threshold_and_renormalize(probs: list[float], theta: float) -> list[float]:
    """Zero entries below ``theta`` and renormalize the survivors.

    ``theta`` must lie in [0, 1).  If every entry falls below the threshold
    the modal action survives alone (lowest index on ties).  Renormalizing
    only ever raises surviving probabilities, so the operation is idempotent
    for a fixed ``theta``.
    """
    if not 0.0 <= theta < 1.0:
        raise PostProcessError(f"threshold must be in [0, 1), got {theta}")
    if not probs:
        raise PostProcessError("empty probability vector")
    kept = [p if p >= theta else 0.0 for p in probs]
    total = sum(kept)
    if total <= 0.0:
        out = [0.0] * len(probs)
        out[int(np.argmax(probs))] = 1.0
        return out
    return [p / total for p in kept]


def purify(probs: list[float]) -> list[float]:
    """One-hot on the modal action; ties break to the lowest index."""
    if not probs:
        raise PostProcessError("empty probability vector")
    out = [0.0] * len(probs)
    out[int(np.argmax(probs))] = 1.0
    return out


@dataclass(frozen=True)
class ThresholdSchedule:
    """Per-round thresholds; later rounds may prune harder.

    ``mode`` selects thresholding or outright purification.  Rounds past the
    end of the list reuse the last entry.
    """

    thresholds: tuple[float, ...]
    mode: str = "threshold"  # "threshold" | "purify"

    def __post_init__(self):
        if self.mode not in ("threshold", "purify"):
            raise PostProcessError(f"unknown mode {self.mode!r}")
        if not self.thresholds:
            raise PostProcessError("schedule needs at least one round entry")
        for t in self.thresholds:
            if not 0.0 <= t < 1.0:
                raise PostProcessError(f"threshold must be in [0, 1), got {t}")

    def theta(self, rnd: int) -> float:
        return self.thresholds[min(rnd, len(self.thresholds) - 1)]


def round_of_key(key: str) -> int:
    """Round index byte of an infoset key ('p0|r2|...' -> 2)."""
    try:
        part = key.split("|", 2)[1]
        assert part.startswith("r")
        return int(part[1:])
    except Exception:
        raise PostProcessError(f"cannot parse round from key {key!r}") from None


def apply_schedule(table: StrategyTable, schedule: ThresholdSchedule) -> StrategyTable:
    """New table with the schedule applied to every infoset by its round."""
    out = StrategyTable(
        spec_hash=table.spec_hash,
        abstraction_hash=table.abstraction_hash,
        iterations=table.iterations,
        variant=table.variant + f"+{schedule.mode}",
        seed=table.seed,
    )
    for key, (labels, probs) in table.entries.items():
        if schedule.mode == "purify":
            out.set(key, labels, purify(probs))
        else:
            out.set(key, labels, threshold_and_renormalize(probs, schedule.theta(round_of_key(key))))
    return out


# ── purification effect experiment ─────────────────────────────────


@dataclass
class PurificationTrial:
    unpurified_payoff: float
    purified_payoff: float

    @property
    def difference(self) -> float:
        return self.purified_payoff - self.unpurified_payoff


@dataclass
class PurificationSummary:
    """Aggregate of purified-minus-unpurified payoff differences."""

    trials: int
    mean_difference: float
    ci_low: float
    ci_high: float
    mean_unpurified: float
    mean_purified: float
    seed: int
    full_game_size: int
    abstract_size: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "trials": self.trials,
                "mean_difference": self.mean_difference,
                "ci95": [self.ci_low, self.ci_high],
                "mean_unpurified": self.mean_unpurified,
                "mean_purified": self.mean_purified,
                "seed": self.seed,
                "full_game_size": self.full_game_size,
                "abstract_size": self.abstract_size,
            },
            sort_keys=True,
        )


def _one_trial(rng: np.random.Generator, n: int, m: int) -> PurificationTrial:
    A = rng.uniform(0.0, 1.0, size=(n, n))
    rows = np.sort(rng.choice(n, size=m, replace=False))
    cols = np.sort(rng.choice(n, size=m, replace=False))
    _, y_full, _ = solve_matrix_game(A)
    x_abs, _, _ = solve_matrix_game(A[np.ix_(rows, cols)])
    lifted = np.zeros(n)
    lifted[rows] = x_abs
    pure = np.zeros(n)
    pure[rows[int(np.argmax(x_abs))]] = 1.0
    return PurificationTrial(
        unpurified_payoff=float(lifted @ A @ y_full),
        purified_payoff=float(pure @ A @ y_full),
    )


def matrix_purification_experiment(
    trials: int = 10_000,
    seed: int = 0,
    full_size: int = 4,
    abstract_size: int = 3,
) -> PurificationSummary:
    """Random zero-sum games: payoff of an abstracted equilibrium, purified
    vs not, against the full game's exact equilibrium opponent.

    Per-trial seeds derive from one root seed in trial order, so trials are
    independently reproducible (and parallelizable without reordering).
    """
    if trials < 2:
        raise PostProcessError("need at least two trials for an interval")
    if not 1 <= abstract_size <= full_size:
        raise PostProcessError("abstract size must be within the full game")
    seeds = np.random.SeedSequence(seed).spawn(trials)
    diffs = np.empty(trials)
    unp = np.empty(trials)
    pur = np.empty(trials)
    for i, ss in enumerate(seeds):
        trial = _one_trial(np.random.Generator(np.random.PCG64(ss)), full_size, abstract_size)
        diffs[i] = trial.difference
        unp[i] = trial.unpurified_payoff
        pur[i] = trial.purified_payoff
    mean = float(diffs.mean())
    half = 1.96 * float(diffs.std(ddof=1)) / trials**0.5
    return PurificationSummary(
        trials=trials,
        mean_difference=mean,
        ci_low=mean - half,
        ci_high=mean + half,
        mean_unpurified=float(unp.mean()),
        mean_purified=float(pur.mean()),
        seed=seed,
        full_game_size=full_size,
        abstract_size=abstract_size,
    )
