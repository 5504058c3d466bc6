"""Action and information abstraction.

Action grids hold pot-fraction bet menus per round and situation class
(opening bet vs facing a bet), always terminated by an all-in entry.  Hand
abstraction groups private states into buckets by equity percentile; public
boards can additionally be clustered over simple structural features.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .cards import Deck
from .game import GameSpec, evaluate_showdown

ALL_IN = math.inf

BUCKET_MAP_VERSION = 1


class AbstractionError(ValueError):
    """Raised for malformed grids, bucket maps, or lookup misses."""


def _validate_fractions(fractions: tuple[float, ...], where: str) -> tuple[float, ...]:
    if not fractions:
        raise AbstractionError(f"{where}: empty fraction list")
    fs = tuple(float(f) for f in fractions)
    if fs[-1] != ALL_IN:
        raise AbstractionError(f"{where}: fraction list must end with all-in")
    if sum(1 for f in fs if f == ALL_IN) != 1:
        raise AbstractionError(f"{where}: all-in must appear exactly once")
    if any(f < 0 for f in fs):
        raise AbstractionError(f"{where}: fractions must be >= 0")
    if any(a >= b for a, b in zip(fs, fs[1:])):
        raise AbstractionError(f"{where}: fractions must be strictly increasing")
    return fs


@dataclass(frozen=True)
class ActionGrid:
    """Per-round bet menus in pot fractions; 0 encodes check/call.

    ``open_fractions[r]`` applies when nothing is outstanding, and
    ``raise_fractions[r]`` when facing a bet.  The trailing entry of every
    list is the all-in sentinel (math.inf).
    """

    open_fractions: tuple[tuple[float, ...], ...]
    raise_fractions: tuple[tuple[float, ...], ...]

    def for_situation(self, rnd: int, facing_bet: bool) -> tuple[float, ...]:
        table = self.raise_fractions if facing_bet else self.open_fractions
        return table[min(rnd, len(table) - 1)]

    def canonical_dict(self) -> dict:
        enc = lambda rows: [["all-in" if f == ALL_IN else f for f in row] for row in rows]
        return {"open": enc(self.open_fractions), "raise": enc(self.raise_fractions)}

    def grid_hash(self) -> str:
        import hashlib

        return hashlib.sha256(
            json.dumps(self.canonical_dict(), sort_keys=True).encode()
        ).hexdigest()


def build_action_grid(
    open_fractions: list[list[float]], raise_fractions: list[list[float]] | None = None
) -> ActionGrid:
    """Validate and freeze an action grid; one fraction row per round.

    A single row is broadcast to every round.  ``raise_fractions`` defaults
    to the opening rows.
    """
    if raise_fractions is None:
        raise_fractions = open_fractions
    opens = tuple(
        _validate_fractions(tuple(row), f"open round {i}")
        for i, row in enumerate(open_fractions)
    )
    raises = tuple(
        _validate_fractions(tuple(row), f"raise round {i}")
        for i, row in enumerate(raise_fractions)
    )
    if not opens or not raises:
        raise AbstractionError("grid needs at least one round of fractions")
    return ActionGrid(open_fractions=opens, raise_fractions=raises)


def default_grid() -> ActionGrid:
    return build_action_grid([[0.5, 1.0, ALL_IN]], [[1.0, ALL_IN]])


def round_half_down(x: float) -> int:
    """Round to nearest integer with exact halves rounding down."""
    return int(math.ceil(x - 0.5))


def concrete_bet_sizes(
    fractions: tuple[float, ...], pot: int, min_legal: int, stack: int
) -> list[int]:
    """Chip wagers for pot-fraction entries, clamped and deduplicated.

    All-in maps to the full remaining stack.  Fraction 0 (check/call) yields
    no wager and is skipped here.  Sizes that clamp onto each other merge.
    """
    if stack <= 0:
        return []
    sizes: list[int] = []
    for f in fractions:
        if f == 0:
            continue
        chips = stack if f == ALL_IN else round_half_down(f * pot)
        chips = max(min_legal, min(chips, stack))
        if not sizes or sizes[-1] != chips:
            sizes.append(chips)
    return sorted(set(sizes))


# ── hand bucketing ─────────────────────────────────────────────────


@dataclass
class BucketMap:
    """Total mapping from observed private state to bucket id, per round.

    Keys are produced by :func:`private_state_key`.  ``per_round[r]`` of None
    means round ``r`` is unabstracted (raw cards identify the infoset).
    """

    version: int
    per_round: list[dict[str, int] | None]

    def bucket_label(self, rnd: int, key: str) -> str | None:
        table = self.per_round[min(rnd, len(self.per_round) - 1)]
        if table is None:
            return None
        try:
            return str(table[key])
        except KeyError:
            raise AbstractionError(f"bucket map has no entry for {key!r}") from None

    def map_hash(self) -> str:
        import hashlib

        blob = json.dumps(
            [sorted(t.items()) if t is not None else None for t in self.per_round],
            sort_keys=True,
        ).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_json(self) -> str:
        return json.dumps(
            {"version": self.version, "per_round": self.per_round}, sort_keys=True
        )

    @classmethod
    def from_json(cls, blob: str) -> "BucketMap":
        data = json.loads(blob)
        if data.get("version") != BUCKET_MAP_VERSION:
            raise AbstractionError(f"unsupported bucket map version {data.get('version')}")
        return cls(version=data["version"], per_round=data["per_round"])


def private_state_key(deck: Deck, hand: tuple[int, ...], board: tuple[int, ...]) -> str:
    return deck.cards_text(sorted(hand)) + "@" + deck.cards_text(sorted(board))


def bucket_by_equity_percentiles(
    equities: dict[str, float],
    k: int,
    weights: dict[str, float] | None = None,
) -> dict[str, int]:
    """Group states into at most ``k`` contiguous equity-percentile buckets.

    States with equal equity always share a bucket.  When ``k`` covers every
    distinct equity the grouping is lossless (one bucket per value).  Bucket
    ids come out contiguous from 0 and non-decreasing in equity; fewer than
    ``k`` may be populated.
    """
    if k < 1:
        raise AbstractionError("bucket count must be >= 1")
    if not equities:
        raise AbstractionError("no states to bucket")
    for key, e in equities.items():
        if not (0.0 <= e <= 1.0):
            raise AbstractionError(f"equity out of range for {key!r}: {e}")
    w = weights or {key: 1.0 for key in equities}
    groups: dict[float, list[str]] = {}
    for key, e in equities.items():
        groups.setdefault(e, []).append(key)
    ordered = sorted(groups)
    if k >= len(ordered):
        return {
            key: i for i, e in enumerate(ordered) for key in groups[e]
        }
    total = sum(w[key] for key in equities)
    out: dict[str, int] = {}
    raw_ids: list[int] = []
    cum = 0.0
    for e in ordered:
        mass = sum(w[key] for key in groups[e])
        mid = (cum + mass / 2.0) / total
        raw_ids.append(min(k - 1, int(mid * k)))
        cum += mass
    # Relabel contiguously, preserving equity order.
    relabel: dict[int, int] = {}
    for rid in raw_ids:
        if rid not in relabel:
            relabel[rid] = len(relabel)
    for e, rid in zip(ordered, raw_ids):
        for key in groups[e]:
            out[key] = relabel[rid]
    return out


def hand_equity_vs_uniform(
    spec: GameSpec, board: tuple[int, ...], hand: tuple[int, ...]
) -> float:
    """Equity (win + half tie) against a uniform opponent and runout."""
    deck_cards = range(len(spec.ranks) * len(spec.suits))
    seen = set(hand) | set(board)
    remaining = [c for c in deck_cards if c not in seen]
    missing = sum(spec.board_per_round) - len(board)
    total = 0.0
    count = 0
    for opp in combinations(remaining, spec.private_cards):
        rest = [c for c in remaining if c not in opp]
        for extra in combinations(rest, missing):
            sign = evaluate_showdown(spec, board + extra, hand, opp)
            total += (sign + 1) / 2.0
            count += 1
    if count == 0:
        raise AbstractionError("no opponent hands available for equity")
    return total / count


def build_equity_bucket_map(
    spec: GameSpec, boards: list[tuple[int, ...]], rnd: int, k: int
) -> dict[str, int]:
    """Bucket every (hand, board) private state on ``boards`` at round ``rnd``."""
    deck = spec.deck()
    deck_cards = range(len(deck))
    mapping: dict[str, int] = {}
    for board in boards:
        seen = set(board)
        equities = {}
        for hand in combinations([c for c in deck_cards if c not in seen], spec.private_cards):
            equities[private_state_key(deck, hand, board)] = hand_equity_vs_uniform(
                spec, tuple(board), hand
            )
        mapping.update(bucket_by_equity_percentiles(equities, k))
    return mapping


# ── board clustering ───────────────────────────────────────────────

BOARD_FEATURES = ("suit_pattern", "rank_pattern", "paired", "connected")


def board_features(
    deck: Deck, board: tuple[int, ...], features: tuple[str, ...] = BOARD_FEATURES
) -> np.ndarray:
    values = sorted((deck.rank_value(c) for c in board), reverse=True)
    suits = [c % deck.n_suits for c in board]
    out: list[float] = []
    for name in features:
        if name == "suit_pattern":
            counts = sorted((suits.count(s) for s in set(suits)), reverse=True)
            counts += [0] * (len(board) - len(counts))
            out.extend(c / len(board) for c in counts)
        elif name == "rank_pattern":
            out.extend(v / 14.0 for v in values)
        elif name == "paired":
            out.append(1.0 if len(set(values)) < len(values) else 0.0)
        elif name == "connected":
            spread = values[0] - values[-1]
            slack = max(0, spread - (len(board) - 1))
            out.append(1.0 / (1.0 + slack))
        else:
            raise AbstractionError(f"unknown board feature {name!r}")
    return np.array(out, dtype=float)


def cluster_boards(
    deck: Deck,
    boards: list[tuple[int, ...]],
    k: int,
    seed: int,
    features: tuple[str, ...] = BOARD_FEATURES,
) -> dict[str, int]:
    """Deterministic k-means partition of boards over structural features.

    Boards are canonicalized (sorted) first, so any permutation of the input
    yields the same partition for a fixed seed.  When ``k`` is at least the
    board count every board is its own cluster.
    """
    if k < 1:
        raise AbstractionError("cluster count must be >= 1")
    canon = sorted({tuple(sorted(b)) for b in boards})
    keys = [deck.cards_text(b) for b in canon]
    if k >= len(canon):
        return {key: i for i, key in enumerate(keys)}
    mat = np.stack([board_features(deck, b, features) for b in canon])
    rng = np.random.Generator(np.random.PCG64(seed))

    # k-means++ seeding
    centers = [mat[rng.integers(len(mat))]]
    while len(centers) < k:
        d2 = np.min(
            np.stack([np.sum((mat - c) ** 2, axis=1) for c in centers]), axis=0
        )
        if d2.sum() == 0:
            centers.append(mat[rng.integers(len(mat))])
            continue
        centers.append(mat[rng.choice(len(mat), p=d2 / d2.sum())])
    centers_arr = np.stack(centers)

    assign = np.zeros(len(mat), dtype=int)
    for _ in range(100):
        dists = ((mat[:, None, :] - centers_arr[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        if np.array_equal(new_assign, assign) and _ > 0:
            break
        assign = new_assign
        for j in range(k):
            members = mat[assign == j]
            if len(members):
                centers_arr[j] = members.mean(axis=0)
    # Stable labels: clusters numbered by first appearance in canonical order.
    relabel: dict[int, int] = {}
    out: dict[str, int] = {}
    for key, a in zip(keys, assign):
        if int(a) not in relabel:
            relabel[int(a)] = len(relabel)
        out[key] = relabel[int(a)]
    return out


# ── combined abstraction handle ────────────────────────────────────


@dataclass
class Abstraction:
    """Action grid plus optional hand bucketing; None grid means native actions."""

    grid: ActionGrid | None = None
    buckets: BucketMap | None = None

    def abstraction_hash(self) -> str:
        import hashlib

        parts = [
            self.grid.grid_hash() if self.grid else "native",
            self.buckets.map_hash() if self.buckets else "lossless",
        ]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()


LOSSLESS = Abstraction(grid=None, buckets=None)
