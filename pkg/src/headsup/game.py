"""Heads-up betting rules engine, parameterized by a declarative game spec.

The engine covers ante games with fixed bet sizes (used by the small
benchmark games) and blind games with no-limit raise-to semantics.  All chip
amounts are integers.  States are immutable; applying an action or a chance
outcome returns a new state.

Conventions:
  * Two players, 0 and 1.  In blind games player 0 posts the small blind,
    acts first on round 0, and acts last on later rounds.  In ante games
    player 0 acts first on every round.
  * A raise is expressed as the total amount committed by the raiser in the
    current round ("raise-to"), never as an increment.
  * Terminal payoffs are net chip changes for player 0; the game is zero-sum.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from math import comb
from typing import Iterator

from .cards import Deck

CHANCE_ENUMERATION_LIMIT = 500_000


class GameSpecError(ValueError):
    """Raised for malformed or inconsistent game specifications."""


class IllegalActionError(ValueError):
    """Raised when an action violates the current state's legal set."""


class ActionKind(str, Enum):
    FOLD = "fold"
    CHECK = "check"
    CALL = "call"
    RAISE = "raise"


@dataclass(frozen=True)
class ActionDescriptor:
    """One player action.

    ``amount`` is the raise-to target and is present only for RAISE.  When
    produced by :func:`legal_actions` for a no-limit state, the RAISE entry
    carries the legal raise-to interval in ``min_to``/``max_to`` and leaves
    ``amount`` unset; fixed-bet games emit a concrete amount directly.
    """

    kind: ActionKind
    amount: int | None = None
    min_to: int | None = None
    max_to: int | None = None

    def token(self) -> str:
        if self.kind is ActionKind.FOLD:
            return "f"
        if self.kind is ActionKind.CHECK:
            return "x"
        if self.kind is ActionKind.CALL:
            return "c"
        return f"r{self.amount}"


def action_from_token(token: str) -> ActionDescriptor:
    if token == "f":
        return ActionDescriptor(ActionKind.FOLD)
    if token == "x":
        return ActionDescriptor(ActionKind.CHECK)
    if token == "c":
        return ActionDescriptor(ActionKind.CALL)
    if token.startswith("r"):
        return ActionDescriptor(ActionKind.RAISE, amount=int(token[1:]))
    raise ValueError(f"bad action token {token!r}")


def split_action_tokens(round_text: str) -> list[str]:
    """Split one round's concatenated history ("xr40c") into tokens."""
    out: list[str] = []
    i = 0
    while i < len(round_text):
        ch = round_text[i]
        if ch in "fxc":
            out.append(ch)
            i += 1
        elif ch == "r":
            j = i + 1
            while j < len(round_text) and round_text[j].isdigit():
                j += 1
            if j == i + 1:
                raise ValueError(f"bad history text {round_text!r}")
            out.append(round_text[i:j])
            i = j
        else:
            raise ValueError(f"bad history text {round_text!r}")
    return out


@dataclass(frozen=True)
class GameSpec:
    """Declarative description of a heads-up game."""

    name: str
    ranks: str
    suits: str
    private_cards: int
    board_per_round: tuple[int, ...]  # board cards revealed at each round start
    small_blind: int
    big_blind: int
    starting_stack: int
    blind_style: str = "blinds"  # "blinds" | "antes" (antes use big_blind)
    bet_structure: str = "no_limit"  # "no_limit" | "fixed"
    fixed_bets: tuple[int, ...] | None = None  # per-round bet size for "fixed"
    max_raises_per_round: int | None = None  # aggressive-action cap for "fixed"
    showdown_rule: str = "poker5"  # "poker5" | "high_card" | "pair_then_high"

    @property
    def num_rounds(self) -> int:
        return len(self.board_per_round)

    def deck(self) -> Deck:
        return Deck(self.ranks, self.suits)

    def canonical_dict(self) -> dict:
        return {
            "name": self.name,
            "ranks": self.ranks,
            "suits": self.suits,
            "private_cards": self.private_cards,
            "board_per_round": list(self.board_per_round),
            "small_blind": self.small_blind,
            "big_blind": self.big_blind,
            "starting_stack": self.starting_stack,
            "blind_style": self.blind_style,
            "bet_structure": self.bet_structure,
            "fixed_bets": list(self.fixed_bets) if self.fixed_bets else None,
            "max_raises_per_round": self.max_raises_per_round,
            "showdown_rule": self.showdown_rule,
        }

    def spec_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def validate_spec(spec: GameSpec) -> None:
    if spec.num_rounds < 1:
        raise GameSpecError("at least one betting round required")
    if not (0 < spec.small_blind <= spec.big_blind <= spec.starting_stack):
        raise GameSpecError("need starting_stack >= big_blind >= small_blind > 0")
    if spec.private_cards < 1:
        raise GameSpecError("players need at least one private card")
    deck_size = len(spec.ranks) * len(spec.suits)
    needed = 2 * spec.private_cards + sum(spec.board_per_round)
    if needed > deck_size:
        raise GameSpecError(f"deck has {deck_size} cards, deal needs {needed}")
    if spec.blind_style not in ("blinds", "antes"):
        raise GameSpecError(f"unknown blind_style {spec.blind_style!r}")
    if spec.bet_structure not in ("no_limit", "fixed"):
        raise GameSpecError(f"unknown bet_structure {spec.bet_structure!r}")
    if spec.bet_structure == "fixed":
        if spec.fixed_bets is None or len(spec.fixed_bets) != spec.num_rounds:
            raise GameSpecError("fixed games need one bet size per round")
        if any(b <= 0 for b in spec.fixed_bets):
            raise GameSpecError("fixed bet sizes must be positive")
        if spec.max_raises_per_round is None or spec.max_raises_per_round < 1:
            raise GameSpecError("fixed games need max_raises_per_round >= 1")
    if spec.showdown_rule not in ("poker5", "high_card", "pair_then_high"):
        raise GameSpecError(f"unknown showdown_rule {spec.showdown_rule!r}")
    if spec.showdown_rule == "poker5":
        if spec.private_cards + sum(spec.board_per_round) < 5:
            raise GameSpecError("poker5 showdown needs five cards per player")
    Deck(spec.ranks, spec.suits)  # validates characters


PRESETS: dict[str, GameSpec] = {}


def _register(spec: GameSpec) -> GameSpec:
    validate_spec(spec)
    PRESETS[spec.name] = spec
    return spec


KUHN = _register(
    GameSpec(
        name="kuhn",
        ranks="JQK",
        suits="s",
        private_cards=1,
        board_per_round=(0,),
        small_blind=1,
        big_blind=1,
        starting_stack=2,
        blind_style="antes",
        bet_structure="fixed",
        fixed_bets=(1,),
        max_raises_per_round=1,
        showdown_rule="high_card",
    )
)

LEDUC = _register(
    GameSpec(
        name="leduc",
        ranks="JQK",
        suits="sh",
        private_cards=1,
        board_per_round=(0, 1),
        small_blind=1,
        big_blind=1,
        starting_stack=13,
        blind_style="antes",
        bet_structure="fixed",
        fixed_bets=(2, 4),
        max_raises_per_round=2,
        showdown_rule="pair_then_high",
    )
)

MINI_NLHE = _register(
    GameSpec(
        name="mini",
        ranks="9TJQKA",
        suits="cdhs",
        private_cards=2,
        board_per_round=(0, 3),
        small_blind=50,
        big_blind=100,
        starting_stack=20_000,
        blind_style="blinds",
        bet_structure="no_limit",
        showdown_rule="poker5",
    )
)

RIVER_NLHE = _register(
    GameSpec(
        name="river",
        ranks="23456789TJQKA",
        suits="cdhs",
        private_cards=2,
        board_per_round=(5,),
        small_blind=50,
        big_blind=100,
        starting_stack=20_000,
        blind_style="blinds",
        bet_structure="no_limit",
        showdown_rule="poker5",
    )
)


def preset(name: str) -> GameSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise GameSpecError(f"unknown preset {name!r}") from None


@dataclass(frozen=True)
class DealOutcome:
    """One chance outcome: private hands on round 0, board cards afterwards."""

    hands: tuple[tuple[int, ...], tuple[int, ...]] | None
    board: tuple[int, ...]

    def cards(self) -> tuple[int, ...]:
        out: tuple[int, ...] = ()
        if self.hands is not None:
            out = self.hands[0] + self.hands[1]
        return out + self.board


@dataclass(frozen=True)
class HandState:
    """Immutable state of one hand."""

    spec: GameSpec = field(repr=False)
    phase: str  # "chance" | "act" | "fold" | "showdown"
    round: int
    hands: tuple[tuple[int, ...], tuple[int, ...]]
    board: tuple[int, ...]
    stacks: tuple[int, int]
    paid: tuple[int, int]  # completed-round contributions, antes included
    committed: tuple[int, int]  # current round, live blinds included
    to_act: int
    acted: tuple[bool, bool]
    raises_made: int
    last_increment: int
    history: tuple[str, ...]  # one token string per started round
    folded: int | None = None

    @property
    def pot(self) -> int:
        """All chips committed to the hand so far, blinds included."""
        return sum(self.paid) + sum(self.committed)

    def to_call(self, player: int | None = None) -> int:
        p = self.to_act if player is None else player
        return max(self.committed) - self.committed[p]

    def history_text(self) -> str:
        return "/".join(self.history)

    def is_terminal(self) -> bool:
        return self.phase in ("fold", "showdown")


def first_actor(spec: GameSpec, rnd: int) -> int:
    if spec.blind_style == "antes":
        return 0
    return 0 if rnd == 0 else 1


def new_hand(spec: GameSpec) -> HandState:
    """Start a hand: post blinds or antes, await the round-0 deal."""
    validate_spec(spec)
    if spec.blind_style == "antes":
        ante = spec.big_blind
        stacks = (spec.starting_stack - ante, spec.starting_stack - ante)
        paid = (ante, ante)
        committed = (0, 0)
        last_increment = 0
    else:
        sb, bb = spec.small_blind, spec.big_blind
        stacks = (spec.starting_stack - sb, spec.starting_stack - bb)
        paid = (0, 0)
        committed = (sb, bb)
        last_increment = bb  # the blind counts as the live bet to beat
    return HandState(
        spec=spec,
        phase="chance",
        round=0,
        hands=((), ()),
        board=(),
        stacks=stacks,
        paid=paid,
        committed=committed,
        to_act=-1,
        acted=(False, False),
        raises_made=0,
        last_increment=last_increment,
        history=(),
    )


def chip_conservation_ok(state: HandState) -> bool:
    total = sum(state.stacks) + sum(state.paid) + sum(state.committed)
    return total == 2 * state.spec.starting_stack


def _dealt_cards(state: HandState) -> set[int]:
    return set(state.hands[0]) | set(state.hands[1]) | set(state.board)


def enumerate_chance(
    spec: GameSpec, rnd: int, state: HandState
) -> list[tuple[DealOutcome, float]]:
    """All equally likely outcomes for the deal at the start of ``rnd``.

    Round 0 outcomes assign both private hands (ordered across players,
    unordered within a hand) plus any round-0 board.  Later rounds deal board
    cards only.  Raises GameSpecError when the outcome count exceeds the
    enumeration guard; sampling must be used instead.
    """
    deck = list(range(len(spec.ranks) * len(spec.suits)))
    seen = _dealt_cards(state)
    avail = [c for c in deck if c not in seen]
    n = len(avail)
    k_board = spec.board_per_round[rnd]
    if rnd == 0:
        p = spec.private_cards
        count = comb(n, p) * comb(n - p, p) * comb(n - 2 * p, k_board)
        if count > CHANCE_ENUMERATION_LIMIT:
            raise GameSpecError(f"chance outcome count {count} exceeds guard")
        outcomes = []
        for h0 in combinations(avail, p):
            rest0 = [c for c in avail if c not in h0]
            for h1 in combinations(rest0, p):
                rest1 = [c for c in rest0 if c not in h1]
                for b in combinations(rest1, k_board):
                    outcomes.append(DealOutcome(hands=(h0, h1), board=b))
        prob = 1.0 / len(outcomes)
        return [(o, prob) for o in outcomes]
    count = comb(n, k_board)
    if count > CHANCE_ENUMERATION_LIMIT:
        raise GameSpecError(f"chance outcome count {count} exceeds guard")
    prob = 1.0 / count
    return [(DealOutcome(hands=None, board=b), prob) for b in combinations(avail, k_board)]


def sample_chance(spec: GameSpec, rnd: int, state: HandState, rng) -> DealOutcome:
    """Sample one chance outcome uniformly; ``rng`` is a random.Random."""
    deck = list(range(len(spec.ranks) * len(spec.suits)))
    seen = _dealt_cards(state)
    avail = [c for c in deck if c not in seen]
    k_board = spec.board_per_round[rnd]
    if rnd == 0:
        p = spec.private_cards
        draw = rng.sample(avail, 2 * p + k_board)
        h0 = tuple(sorted(draw[:p]))
        h1 = tuple(sorted(draw[p : 2 * p]))
        b = tuple(sorted(draw[2 * p :]))
        return DealOutcome(hands=(h0, h1), board=b)
    return DealOutcome(hands=None, board=tuple(sorted(rng.sample(avail, k_board))))


def _begin_action_phase(state: HandState) -> HandState:
    state = replace(state, history=state.history + ("",))
    even = state.committed[0] == state.committed[1]
    # Betting is locked once a player is all-in with commitments settled;
    # remaining rounds only deal cards.
    if min(state.stacks) == 0 and even:
        return _close_round(state)
    if not even:
        actor = 0 if state.committed[0] < state.committed[1] else 1
    else:
        actor = first_actor(state.spec, state.round)
    return replace(state, phase="act", to_act=actor)


def apply_chance(state: HandState, outcome: DealOutcome) -> HandState:
    if state.phase != "chance":
        raise IllegalActionError("state is not awaiting a deal")
    seen = _dealt_cards(state)
    new_cards = outcome.cards()
    if len(set(new_cards)) != len(new_cards) or seen & set(new_cards):
        raise IllegalActionError("dealt cards overlap")
    hands = state.hands
    if state.round == 0:
        if outcome.hands is None:
            raise IllegalActionError("round-0 outcome must include private hands")
        if any(len(h) != state.spec.private_cards for h in outcome.hands):
            raise IllegalActionError("wrong private hand size")
        hands = (tuple(sorted(outcome.hands[0])), tuple(sorted(outcome.hands[1])))
    elif outcome.hands is not None:
        raise IllegalActionError("private hands only dealt on round 0")
    if len(outcome.board) != state.spec.board_per_round[state.round]:
        raise IllegalActionError("wrong board card count for this round")
    state = replace(
        state,
        hands=hands,
        board=state.board + tuple(sorted(outcome.board)),
    )
    return _begin_action_phase(state)


def deal_hand(spec: GameSpec, outcome: DealOutcome) -> HandState:
    """Convenience: new hand with the round-0 deal applied."""
    return apply_chance(new_hand(spec), outcome)


def _raise_bounds(state: HandState) -> tuple[int, int] | None:
    """Legal raise-to interval for the player to act, or None."""
    spec = state.spec
    p = state.to_act
    opp = 1 - p
    level = max(state.committed)
    if state.stacks[opp] == 0:
        return None  # nothing further can be won by raising
    if spec.bet_structure == "fixed":
        assert spec.max_raises_per_round is not None and spec.fixed_bets is not None
        if state.raises_made >= spec.max_raises_per_round:
            return None
        to = level + spec.fixed_bets[state.round]
        if to - state.committed[p] > state.stacks[p]:
            return None  # preset stacks are sized so this never binds
        return (to, to)
    max_to = state.committed[p] + state.stacks[p]
    if max_to <= level:
        return None
    min_to = level + max(spec.big_blind, state.last_increment)
    if min_to > max_to:
        min_to = max_to  # short all-in below a full raise
    return (min_to, max_to)


def legal_actions(state: HandState) -> list[ActionDescriptor]:
    """Available actions: fold only when facing a bet, check/call, raise bounds."""
    if state.phase != "act":
        raise IllegalActionError("no player is to act")
    actions: list[ActionDescriptor] = []
    owe = state.to_call()
    if owe > 0:
        actions.append(ActionDescriptor(ActionKind.FOLD))
        actions.append(ActionDescriptor(ActionKind.CALL))
    else:
        actions.append(ActionDescriptor(ActionKind.CHECK))
    bounds = _raise_bounds(state)
    if bounds is not None:
        lo, hi = bounds
        amt = lo if lo == hi else None
        actions.append(ActionDescriptor(ActionKind.RAISE, amount=amt, min_to=lo, max_to=hi))
    return actions


def _with_history(state: HandState, token: str) -> tuple[str, ...]:
    h = list(state.history)
    h[-1] = h[-1] + token
    return tuple(h)


def _close_round(state: HandState) -> HandState:
    paid = (
        state.paid[0] + state.committed[0],
        state.paid[1] + state.committed[1],
    )
    state = replace(state, paid=paid, committed=(0, 0))
    nxt = state.round + 1
    if nxt >= state.spec.num_rounds:
        return replace(state, phase="showdown", to_act=-1)
    state = replace(
        state,
        round=nxt,
        phase="chance",
        to_act=-1,
        acted=(False, False),
        raises_made=0,
        last_increment=0,
    )
    if state.spec.board_per_round[nxt] == 0:
        return _begin_action_phase(state)
    return state


def apply_action(state: HandState, action: ActionDescriptor) -> HandState:
    """Apply one player action; raises IllegalActionError on violations."""
    if state.phase != "act":
        raise IllegalActionError("no player is to act")
    p = state.to_act
    opp = 1 - p
    owe = state.to_call()
    kind = action.kind

    if kind is ActionKind.FOLD:
        if owe == 0:
            raise IllegalActionError("fold is not legal when checking is free")
        return replace(
            state,
            phase="fold",
            folded=p,
            to_act=-1,
            history=_with_history(state, "f"),
        )

    if kind is ActionKind.CHECK:
        if owe != 0:
            raise IllegalActionError("cannot check while facing a bet")
        nxt = replace(
            state,
            acted=_set(state.acted, p, True),
            to_act=opp,
            history=_with_history(state, "x"),
        )
        if nxt.acted[0] and nxt.acted[1]:
            return _close_round(nxt)
        return nxt

    if kind is ActionKind.CALL:
        if owe == 0:
            raise IllegalActionError("nothing to call; check instead")
        pay = owe  # equal effective stacks make every call exactly affordable
        nxt = replace(
            state,
            stacks=_add(state.stacks, p, -pay),
            committed=_add(state.committed, p, pay),
            acted=_set(state.acted, p, True),
            to_act=opp,
            history=_with_history(state, "c"),
        )
        if nxt.acted[0] and nxt.acted[1]:
            return _close_round(nxt)
        return nxt

    if kind is ActionKind.RAISE:
        bounds = _raise_bounds(state)
        if bounds is None:
            raise IllegalActionError("raising is not legal here")
        if action.amount is None:
            raise IllegalActionError("raise requires a concrete raise-to amount")
        lo, hi = bounds
        to = action.amount
        if not (lo <= to <= hi):
            raise IllegalActionError(f"raise-to {to} outside legal interval [{lo}, {hi}]")
        pay = to - state.committed[p]
        increment = to - max(state.committed)
        return replace(
            state,
            stacks=_add(state.stacks, p, -pay),
            committed=_set(state.committed, p, to),
            acted=_set(state.acted, p, True),
            raises_made=state.raises_made + 1,
            last_increment=increment,
            to_act=opp,
            history=_with_history(state, f"r{to}"),
        )

    raise IllegalActionError(f"unknown action kind {kind!r}")


def _set(t: tuple, i: int, v) -> tuple:
    lst = list(t)
    lst[i] = v
    return tuple(lst)


def _add(t: tuple, i: int, dv: int) -> tuple:
    lst = list(t)
    lst[i] += dv
    return tuple(lst)


def evaluate_showdown(
    spec: GameSpec,
    board: tuple[int, ...],
    hand0: tuple[int, ...],
    hand1: tuple[int, ...],
) -> int:
    """Showdown sign for player 0: +1 win, 0 tie, -1 loss."""
    deck = spec.deck()
    if spec.showdown_rule == "high_card":
        a = max(deck.rank_value(c) for c in hand0)
        b = max(deck.rank_value(c) for c in hand1)
        return (a > b) - (a < b)
    if spec.showdown_rule == "pair_then_high":
        board_ranks = {deck.rank_value(c) for c in board}
        a_pair = any(deck.rank_value(c) in board_ranks for c in hand0)
        b_pair = any(deck.rank_value(c) in board_ranks for c in hand1)
        if a_pair != b_pair:
            return 1 if a_pair else -1
        a = max(deck.rank_value(c) for c in hand0)
        b = max(deck.rank_value(c) for c in hand1)
        return (a > b) - (a < b)
    from .cards import best_five_rank

    ra = best_five_rank(deck, hand0 + board)
    rb = best_five_rank(deck, hand1 + board)
    return (ra > rb) - (ra < rb)


def terminal_value(state: HandState) -> int:
    """Net chip result for player 0 at a terminal state."""
    if not state.is_terminal():
        raise IllegalActionError("state is not terminal")
    contrib = (
        state.paid[0] + state.committed[0],
        state.paid[1] + state.committed[1],
    )
    if state.phase == "fold":
        assert state.folded is not None
        return contrib[1] if state.folded == 1 else -contrib[0]
    sign = evaluate_showdown(state.spec, state.board, state.hands[0], state.hands[1])
    # Completed betting rounds always equalize contributions.
    assert contrib[0] == contrib[1], "showdown with unequal contributions"
    return sign * contrib[1]


def infoset_key(state: HandState, player: int, bucket: str | None = None) -> str:
    """Stable information-set key for ``player`` at ``state``.

    Contains only what the player can observe: seat, round, own private cards
    (or an abstraction bucket label when given), the board grouped by reveal
    round, and the full public action history.
    """
    deck = state.spec.deck()
    if bucket is not None:
        priv = f"B{bucket}"
    else:
        priv = deck.cards_text(sorted(state.hands[player]))
    parts = []
    idx = 0
    for rnd in range(state.round + 1):
        k = state.spec.board_per_round[rnd]
        chunk = state.board[idx : idx + k]
        idx += k
        if k and len(chunk) == k:
            parts.append(deck.cards_text(sorted(chunk)))
    board_repr = ",".join(parts)
    return f"p{player}|r{state.round}|h{priv}|b{board_repr}|a{state.history_text()}"


def iter_states(state: HandState) -> Iterator[HandState]:
    """Depth-first enumeration of every state reachable from ``state``."""
    yield state
    if state.is_terminal():
        return
    if state.phase == "chance":
        for outcome, _ in enumerate_chance(state.spec, state.round, state):
            yield from iter_states(apply_chance(state, outcome))
        return
    for act in legal_actions(state):
        if act.kind is ActionKind.RAISE and act.amount is None:
            continue  # no-limit continuum is not enumerable here
        yield from iter_states(apply_action(state, act))
