"""Match harness: duplicate dealing, chip accounting, payouts, variance.

A duplicate match plays every pre-dealt hand twice with the seats swapped,
so both contestants face the same cards from both sides.  Averaging the two
plays of a pair cancels most of the luck of the deal; the harness reports
the variance of those pair means next to the variance an independent
two-hand average would have had, plus a one-sided significance check on
the reduction.
"""

from __future__ import annotations

import json
import math
import random
import statistics
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from .game import (
    DealOutcome,
    GameSpec,
    HandState,
    IllegalActionError,
    apply_action,
    apply_chance,
    deal_hand,
    terminal_value,
)

SCHEMA_VERSION = 1


class HarnessError(ValueError):
    pass


# ── dealing ────────────────────────────────────────────────────────


@dataclass(frozen=True)
class FullDeal:
    """Every card a hand will need, fixed before play begins."""

    hands: tuple[tuple[int, ...], tuple[int, ...]]
    boards: tuple[tuple[int, ...], ...]


def random_deal(spec: GameSpec, rng: random.Random) -> FullDeal:
    deck = list(range(len(spec.ranks) * len(spec.suits)))
    rng.shuffle(deck)
    it = iter(deck)
    hands = (
        tuple(next(it) for _ in range(spec.private_cards)),
        tuple(next(it) for _ in range(spec.private_cards)),
    )
    boards = tuple(
        tuple(next(it) for _ in range(count)) for count in spec.board_per_round
    )
    return FullDeal(hands=hands, boards=boards)


# ── playing one hand ───────────────────────────────────────────────


@dataclass
class PlayOutcome:
    net0: int  # chips won by seat 0 (negative when seat 0 lost)
    forfeit_seat: int | None
    state: HandState
    traces: tuple


def play_hand(spec: GameSpec, shells, deal: FullDeal) -> PlayOutcome:
    """Drive two agents through one pre-dealt hand.

    An agent returning an action the table rejects forfeits its stake on
    the spot; agents built here always stay legal, so this guards against
    foreign implementations plugged into the harness.
    """
    state = deal_hand(spec, DealOutcome(hands=deal.hands, board=deal.boards[0]))
    for seat, shell in enumerate(shells):
        shell.begin_hand(seat, deal.hands[seat])
        shell.observe_deal(0, deal.boards[0])
    while not state.is_terminal():
        if state.phase == "chance":
            rnd = state.round
            state = apply_chance(state, DealOutcome(hands=None, board=deal.boards[rnd]))
            for shell in shells:
                shell.observe_deal(rnd, deal.boards[rnd])
            continue
        actor = state.to_act
        action = shells[actor].act()
        try:
            state = apply_action(state, action)
        except IllegalActionError:
            stake = state.paid[actor] + state.committed[actor]
            net0 = -stake if actor == 0 else stake
            return PlayOutcome(net0, actor, state, (shells[0].trace, shells[1].trace))
        shells[1 - actor].observe_action(actor, action)
    return PlayOutcome(
        terminal_value(state), None, state, (shells[0].trace, shells[1].trace)
    )


# ── duplicate matches ──────────────────────────────────────────────


@dataclass
class PlayRecord:
    pair: int
    play: int  # 0 first seating, 1 seats swapped
    seat_of_a: int
    net_a: int
    forfeit_seat: int | None
    pot: int
    history: tuple[str, ...]
    events_by_seat: tuple[int, int]  # observed-bet translations per seat
    divergence_by_seat: tuple[int, int]  # worst perceived-pot drift per seat


@dataclass
class DuplicateResult:
    spec_name: str
    big_blind: int
    n_pairs: int
    seed: int
    plays: list[PlayRecord]
    pair_means: list[float]
    net_a: int
    forfeits: int

    @property
    def hands_played(self) -> int:
        return len(self.plays)

    @property
    def bb_per_100_a(self) -> float:
        return bb_per_100(self.net_a, self.big_blind, self.hands_played)

    def variance(self) -> "VarianceComparison":
        return compare_variance(self.pair_means, [p.net_a for p in self.plays])


AgentFactory = Callable[[random.Random], object]


def run_duplicate_match(
    spec: GameSpec,
    make_a: AgentFactory,
    make_b: AgentFactory,
    n_pairs: int,
    seed: int = 0,
) -> DuplicateResult:
    """Play ``n_pairs`` deals twice each, seats swapped on the replay.

    Every play gets freshly built agents on their own derived stream, so a
    contestant cannot carry randomness or state from one play into another.
    """
    if n_pairs < 1:
        raise HarnessError("need at least one pair")
    master = random.Random(seed)
    deal_rng = random.Random(master.getrandbits(64))
    plays: list[PlayRecord] = []
    pair_means: list[float] = []
    net_total = 0
    forfeits = 0
    for i in range(n_pairs):
        deal = random_deal(spec, deal_rng)
        nets = []
        for play in (0, 1):
            agent_a = make_a(random.Random(master.getrandbits(64)))
            agent_b = make_b(random.Random(master.getrandbits(64)))
            seat_a = play
            shells = (agent_a, agent_b) if seat_a == 0 else (agent_b, agent_a)
            out = play_hand(spec, shells, deal)
            net_a = out.net0 if seat_a == 0 else -out.net0
            nets.append(net_a)
            net_total += net_a
            if out.forfeit_seat is not None:
                forfeits += 1
            plays.append(
                PlayRecord(
                    pair=i,
                    play=play,
                    seat_of_a=seat_a,
                    net_a=net_a,
                    forfeit_seat=out.forfeit_seat,
                    pot=out.state.pot,
                    history=out.state.history,
                    events_by_seat=(
                        len(out.traces[0].translation_events),
                        len(out.traces[1].translation_events),
                    ),
                    divergence_by_seat=(
                        out.traces[0].max_pot_divergence,
                        out.traces[1].max_pot_divergence,
                    ),
                )
            )
        pair_means.append((nets[0] + nets[1]) / 2)
    return DuplicateResult(
        spec_name=spec.name,
        big_blind=spec.big_blind,
        n_pairs=n_pairs,
        seed=seed,
        plays=plays,
        pair_means=pair_means,
        net_a=net_total,
        forfeits=forfeits,
    )


# ── rate and variance reporting ────────────────────────────────────


def bb_per_100(chips: float, big_blind: int, hands: int) -> float:
    """Win rate in big blinds per hundred hands."""
    if big_blind <= 0:
        raise HarnessError("big blind must be positive")
    if hands <= 0:
        raise HarnessError("hands must be positive")
    return chips / big_blind / (hands / 100)


@dataclass
class VarianceComparison:
    var_dup: float  # variance of seat-swapped pair means
    var_ind: float  # variance a mean of two independent hands would have
    se_dup: float
    se_ind: float
    z: float
    reduced_95: bool  # one-sided: duplicate variance is lower at 95%


def compare_variance(
    pair_means: Sequence[float], play_scores: Sequence[float]
) -> VarianceComparison:
    if len(pair_means) < 2 or len(play_scores) < 2:
        raise HarnessError("need at least two pairs to compare variance")
    var_dup = statistics.variance(pair_means)
    var_play = statistics.variance(play_scores)
    var_ind = var_play / 2
    # standard error of a sample variance under near-normal scores
    se_dup = var_dup * math.sqrt(2 / (len(pair_means) - 1))
    se_ind = (var_play * math.sqrt(2 / (len(play_scores) - 1))) / 2
    denom = math.hypot(se_dup, se_ind)
    if denom == 0:
        z = math.inf if var_ind > var_dup else 0.0
    else:
        z = (var_ind - var_dup) / denom
    return VarianceComparison(
        var_dup=var_dup,
        var_ind=var_ind,
        se_dup=se_dup,
        se_ind=se_ind,
        z=z,
        reduced_95=z > 1.645,
    )


# ── prize payouts ──────────────────────────────────────────────────

TOTAL_CENTS = 10_000_000  # $100,000.00 prize pool
FLOOR_CENTS = 1_000_000  # $10,000.00 guaranteed per finisher


def _round_half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


def compute_payouts(profits: Sequence[float]) -> tuple[int, int, int, int]:
    """Split the $100,000 pool over four finishers, in exact cents.

    Each finisher is guaranteed $10,000; the remaining $60,000 is divided
    pro rata by positive profit (evenly when nobody finished ahead).
    Arithmetic runs in exact fractions and is rounded half-up to cents;
    any leftover cent goes to the leader, any shortfall comes out of the
    smallest payout still above the floor.  ``profits`` must be sorted
    best-first.
    """
    if len(profits) != 4:
        raise HarnessError("exactly four finishers share the pool")
    if any(profits[i] < profits[i + 1] for i in range(3)):
        raise HarnessError("profits must be sorted best-first")
    shares = [Fraction(max(float(p), 0.0)) for p in profits]
    pool = TOTAL_CENTS - 4 * FLOOR_CENTS
    total = sum(shares)
    if total == 0:
        ideal = [Fraction(TOTAL_CENTS, 4)] * 4
    else:
        ideal = [FLOOR_CENTS + Fraction(pool) * s / total for s in shares]
    cents = [_round_half_up(v) for v in ideal]
    residual = TOTAL_CENTS - sum(cents)
    while residual > 0:
        cents[0] += 1
        residual -= 1
    while residual < 0:
        above = [i for i in range(4) if cents[i] > FLOOR_CENTS]
        if not above:
            raise HarnessError("cannot rebalance below the guaranteed floor")
        take = min(above, key=lambda j: cents[j])
        cents[take] -= 1
        residual += 1
    return (cents[0], cents[1], cents[2], cents[3])


# ── diagnostics ────────────────────────────────────────────────────


def off_tree_report(trace) -> dict:
    """Summarize how far one agent's perceived hand drifted from the table."""
    events = [e.to_dict() for e in trace.translation_events]
    return {
        "schema_version": SCHEMA_VERSION,
        "translation_events": events,
        "off_menu_count": sum(1 for e in events if not e["exact_hit"]),
        "max_pot_divergence": trace.max_pot_divergence,
        "divergences": [list(d) for d in trace.divergences],
        "ending": trace.ending,
        "notes": list(trace.notes),
    }


def write_hand_log(path: str | Path, result: DuplicateResult) -> None:
    """Write one match as JSON lines: a header record, then one per play."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "schema_version": SCHEMA_VERSION,
            "kind": "match_header",
            "spec": result.spec_name,
            "big_blind": result.big_blind,
            "pairs": result.n_pairs,
            "seed": result.seed,
            "net_a": result.net_a,
            "forfeits": result.forfeits,
        }
        fh.write(json.dumps(header) + "\n")
        for rec in result.plays:
            row = {"kind": "play", **asdict(rec)}
            row["history"] = list(rec.history)
            fh.write(json.dumps(row) + "\n")
