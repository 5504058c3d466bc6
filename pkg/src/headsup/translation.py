"""Mapping observed off-menu bets onto the action menu.

An observed wager is normalized by the true pot into a fraction x and placed
between its menu neighbors A < x < B (0 stands for check/call, the top rung
is the bettor's all-in).  The probability of mapping down to A is

    f(x) = (B - x) * (1 + A) / ((B - A) * (1 + x))

which is 1 at x = A, 0 at x = B, and scale-invariant in the pot.  Exact rung
hits never randomize, and wagers outside the rung span clamp to the nearest
extreme deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .abstraction import ALL_IN, ActionGrid


class TranslationError(ValueError):
    """Raised for degenerate inputs (equal rungs, out-of-span queries)."""


def pseudo_harmonic_probability(a: float, b: float, x: float) -> float:
    """Probability of mapping x down to a, for menu neighbors a < b.

    Requires a <= x <= b and a < b; endpoints give 1 and 0 exactly.
    """
    if not a < b:
        raise TranslationError(f"need a < b, got a={a} b={b}")
    if not a <= x <= b:
        raise TranslationError(f"x={x} outside [{a}, {b}]")
    return (b - x) * (1.0 + a) / ((b - a) * (1.0 + x))


@dataclass(frozen=True)
class TranslationEvent:
    """One observed-bet mapping, recorded for diagnostics."""

    round: int
    observed_chips: int
    pot: int
    x: float
    lower: float  # rung A (0 means check/call)
    upper: float  # rung B
    down_probability: float
    draw: float | None  # RNG draw in [0,1); None when no randomization happened
    chosen: float  # the rung actually selected
    exact_hit: bool = False
    clamped: bool = False

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "observed_chips": self.observed_chips,
            "pot": self.pot,
            "x": self.x,
            "lower": self.lower,
            "upper": self.upper,
            "down_probability": self.down_probability,
            "draw": self.draw,
            "chosen": self.chosen,
            "exact_hit": self.exact_hit,
            "clamped": self.clamped,
        }


def translation_ladder(
    grid: ActionGrid, rnd: int, facing_bet: bool, all_in_fraction: float
) -> list[float]:
    """Menu rungs in fraction space: 0 (check/call), grid entries, all-in.

    The all-in sentinel resolves to the opponent's actual stack-to-pot ratio
    for this decision.  Rungs at or above all-in collapse into it.
    """
    if all_in_fraction <= 0:
        raise TranslationError("all-in fraction must be positive")
    rungs = [0.0]
    for f in grid.for_situation(rnd, facing_bet):
        val = all_in_fraction if f == ALL_IN else float(f)
        val = min(val, all_in_fraction)
        if val > rungs[-1]:
            rungs.append(val)
    if rungs[-1] != all_in_fraction:
        rungs.append(all_in_fraction)
    return rungs


def translate_bet(
    observed_chips: int,
    pot: int,
    rnd: int,
    grid: ActionGrid,
    all_in_chips: int,
    rng,
    facing_bet: bool = False,
) -> TranslationEvent:
    """Map an observed wager onto a menu rung; randomize only between rungs.

    ``pot`` is the true pot before the wager, ``all_in_chips`` the bettor's
    maximum possible wager at that point.  ``rng`` supplies one uniform draw
    per genuinely interior observation (the match's shared stream).
    """
    if pot <= 0:
        raise TranslationError("pot must be positive")
    if observed_chips <= 0:
        raise TranslationError("observed wager must be positive")
    x = observed_chips / pot
    ladder = translation_ladder(grid, rnd, facing_bet, all_in_chips / pot)

    if x <= ladder[0]:  # cannot happen for positive wagers, kept for safety
        return TranslationEvent(rnd, observed_chips, pot, x, ladder[0], ladder[0], 1.0, None, ladder[0], clamped=True)
    if x >= ladder[-1]:
        top = ladder[-1]
        exact = abs(x - top) < 1e-12
        return TranslationEvent(
            rnd, observed_chips, pot, x, top, top, 0.0, None, top,
            exact_hit=exact, clamped=not exact,
        )
    for rung in ladder:
        if abs(x - rung) < 1e-12:
            return TranslationEvent(
                rnd, observed_chips, pot, x, rung, rung, 0.0, None, rung, exact_hit=True
            )
    upper_i = next(i for i, rung in enumerate(ladder) if rung > x)
    a, b = ladder[upper_i - 1], ladder[upper_i]
    p_down = pseudo_harmonic_probability(a, b, x)
    draw = rng.random()
    chosen = a if draw < p_down else b
    return TranslationEvent(rnd, observed_chips, pot, x, a, b, p_down, draw, chosen)
