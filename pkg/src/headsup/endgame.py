"""Final-round re-solving.

Given both players' earlier-round strategies and the public line that was
actually taken, this module reconstructs each player's distribution over
private hands, compresses those hands into equity buckets with card removal,
rebuilds the remaining betting at the live pot and stacks, and solves that
small game exactly with the sequence-form solver.

The hand distributions factor per player: a player's chance of holding a
hand and reaching this point is the product of that player's own action
probabilities along the line, times the deal prior.  Opponent action
probabilities are common to every hand and cancel on normalization, so the
replay is linear in hands, not quadratic in hand pairs.  Card removal
between the two hands enters afterwards, in the conditional equities and in
the joint bucket mass.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .abstraction import Abstraction, ActionGrid, bucket_by_equity_percentiles
from .cards import best_five_rank
from .evaluate import exploitability
from .game import (
    DealOutcome,
    GameSpec,
    HandState,
    action_from_token,
    apply_action,
    apply_chance,
    first_actor,
    new_hand,
    split_action_tokens,
)
from .model import Chance, Decision, InfosetRecord, Node, Terminal, abstract_actions, model_infoset_key
from .seqform import solve_zero_sum, solution_tables
from .strategy import StrategyTable


class EndgameError(ValueError):
    """Raised when an ending cannot be reconstructed or solved."""


# ── hand distributions from the earlier strategy ───────────────────


@dataclass(frozen=True)
class RangeDistribution:
    """A player's distribution over private hands entering the ending.

    ``truncated_steps`` counts own-action steps dropped from the end of the
    line because the full product had zero mass everywhere; the longest
    prefix with positive mass is used instead (zero steps on the prior,
    which is always positive).
    """

    hands: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]
    truncated_steps: int = 0

    @property
    def used_fallback(self) -> bool:
        return self.truncated_steps > 0

    def weight_of(self, hand: tuple[int, ...]) -> float:
        try:
            return self.weights[self.hands.index(tuple(sorted(hand)))]
        except ValueError:
            return 0.0


def _compatible_hands(spec: GameSpec, board_cards: set[int]) -> list[tuple[int, ...]]:
    deck_size = len(spec.ranks) * len(spec.suits)
    avail = [c for c in range(deck_size) if c not in board_cards]
    return [tuple(h) for h in itertools.combinations(avail, spec.private_cards)]


def _placeholder_hand(spec: GameSpec, used: set[int]) -> tuple[int, ...]:
    deck_size = len(spec.ranks) * len(spec.suits)
    free = [c for c in range(deck_size) if c not in used]
    return tuple(free[: spec.private_cards])


def _own_action_multipliers(
    spec: GameSpec,
    abstraction: Abstraction,
    table: StrategyTable,
    player: int,
    hand: tuple[int, ...],
    board_by_round: tuple[tuple[int, ...], ...],
    history: tuple[str, ...],
) -> list[float]:
    """Probabilities of the player's own actions along the line, in order."""
    opp = _placeholder_hand(spec, set(hand) | {c for b in board_by_round for c in b})
    hands = (hand, opp) if player == 0 else (opp, hand)
    state = new_hand(spec)
    state = apply_chance(state, DealOutcome(hands=hands, board=board_by_round[0]))
    mults: list[float] = []
    for rnd, tokens in enumerate(history):
        while state.phase == "chance":
            state = apply_chance(
                state, DealOutcome(hands=None, board=board_by_round[state.round])
            )
        for tok in split_action_tokens(tokens):
            if state.phase != "act" or state.round != rnd:
                raise EndgameError(f"history does not replay: stuck before {tok!r}")
            if state.to_act == player:
                key = model_infoset_key(state, player, abstraction)
                try:
                    mults.append(table.prob(key, tok))
                except KeyError:
                    # unknown position: treat the strategy there as uniform
                    mults.append(1.0 / len(abstract_actions(state, abstraction)))
            state = apply_action(state, action_from_token(tok))
    return mults


def compute_reach_ranges(
    spec: GameSpec,
    abstraction: Abstraction,
    table0: StrategyTable,
    table1: StrategyTable,
    board_by_round: tuple[tuple[int, ...], ...],
    history: tuple[str, ...],
) -> tuple[RangeDistribution, RangeDistribution]:
    """Both players' hand distributions after the given earlier-round line.

    ``board_by_round`` must cover every round (the final round's cards are
    needed downstream for equities); ``history`` covers the rounds before
    the final one.  Hands overlapping the board get zero prior.
    """
    if len(board_by_round) != spec.num_rounds:
        raise EndgameError("need board cards for every round")
    for rnd, cards in enumerate(board_by_round):
        if len(cards) != spec.board_per_round[rnd]:
            raise EndgameError(f"round {rnd} expects {spec.board_per_round[rnd]} board cards")
    final = spec.num_rounds - 1
    if len(history) == spec.num_rounds and history[final] == "":
        history = history[:final]
    if len(history) != final:
        raise EndgameError("history must cover exactly the rounds before the last")
    board_cards = {c for b in board_by_round for c in b}
    if len(board_cards) != sum(spec.board_per_round):
        raise EndgameError("board cards overlap")
    hands = _compatible_hands(spec, board_cards)
    out = []
    for player, table in ((0, table0), (1, table1)):
        steps = [
            _own_action_multipliers(
                spec, abstraction, table, player, h, board_by_round, history
            )
            for h in hands
        ]
        n_steps = len(steps[0]) if steps else 0
        # Longest prefix of own actions with positive total mass.
        use = n_steps
        while use > 0:
            total = sum(float(np.prod(m[:use])) for m in steps)
            if total > 0.0:
                break
            use -= 1
        weights = np.array([float(np.prod(m[:use])) for m in steps])
        weights /= weights.sum()
        out.append(
            RangeDistribution(
                hands=tuple(hands),
                weights=tuple(float(w) for w in weights),
                truncated_steps=n_steps - use,
            )
        )
    return out[0], out[1]


# ── conditional equities and bucket aggregation ────────────────────


def showdown_score(spec: GameSpec, board: tuple[int, ...], hand: tuple[int, ...]):
    """Comparable strength of one hand on this board; higher wins."""
    deck = spec.deck()
    if spec.showdown_rule == "high_card":
        return (max(deck.rank_value(c) for c in hand),)
    if spec.showdown_rule == "pair_then_high":
        board_ranks = {deck.rank_value(c) for c in board}
        paired = any(deck.rank_value(c) in board_ranks for c in hand)
        return (1 if paired else 0, max(deck.rank_value(c) for c in hand))
    return best_five_rank(deck, hand + board)


def conditional_equities(
    spec: GameSpec,
    board: tuple[int, ...],
    hands: tuple[tuple[int, ...], ...],
    opponent: RangeDistribution,
) -> tuple[list[float], int]:
    """Equity of each hand against the opponent's distribution.

    Opponent combos sharing a card with the hand are removed and the rest
    renormalized.  A hand whose conditional opponent range is empty gets
    equity 1/2; the count of such hands is returned alongside.
    """
    scores = {h: showdown_score(spec, board, h) for h in hands}
    opp_scores = {h: showdown_score(spec, board, h) for h in opponent.hands}
    equities: list[float] = []
    empty = 0
    for h in hands:
        mine = scores[h]
        blocked = set(h)
        num = den = 0.0
        for oh, w in zip(opponent.hands, opponent.weights):
            if w == 0.0 or blocked & set(oh):
                continue
            den += w
            theirs = opp_scores[oh]
            if mine > theirs:
                num += w
            elif mine == theirs:
                num += 0.5 * w
        if den == 0.0:
            empty += 1
            equities.append(0.5)
        else:
            equities.append(num / den)
    return equities, empty


@dataclass(frozen=True)
class BucketedEnding:
    """Joint chance structure of an ending after equity bucketing.

    ``mass[i, j]`` is the normalized probability that player 0 sits in
    bucket i while player 1 sits in bucket j, summed over disjoint hand
    pairs; ``ev[i, j]`` is the mean showdown sign inside that cell.
    """

    names0: tuple[str, ...]
    names1: tuple[str, ...]
    mass: np.ndarray
    ev: np.ndarray
    hand_buckets: tuple[dict[tuple[int, ...], int], dict[tuple[int, ...], int]]
    equity_fallbacks: tuple[int, int]


def bucket_ending(
    spec: GameSpec,
    board: tuple[int, ...],
    range0: RangeDistribution,
    range1: RangeDistribution,
    k: int,
) -> BucketedEnding:
    """Compress both ranges into equity buckets and aggregate the joint mass.

    Bucketing is per player against the other's full distribution; the joint
    cell mass and in-cell showdown averages then count only card-disjoint
    hand pairs, which is where removal between the hands enters.
    """
    deck = spec.deck()
    eq0, empty0 = conditional_equities(spec, board, range0.hands, range1)
    eq1, empty1 = conditional_equities(spec, board, range1.hands, range0)
    maps = []
    for rng, eqs in ((range0, eq0), (range1, eq1)):
        keys = [deck.cards_text(h) for h in rng.hands]
        assignment = bucket_by_equity_percentiles(
            dict(zip(keys, eqs)),
            k,
            weights=dict(zip(keys, rng.weights)),
        )
        maps.append({h: assignment[t] for h, t in zip(rng.hands, keys)})
    b0, b1 = maps
    n0 = max(b0.values()) + 1
    n1 = max(b1.values()) + 1
    mass = np.zeros((n0, n1))
    signed = np.zeros((n0, n1))
    scores0 = {h: showdown_score(spec, board, h) for h in range0.hands}
    scores1 = {h: showdown_score(spec, board, h) for h in range1.hands}
    for h0, w0 in zip(range0.hands, range0.weights):
        if w0 == 0.0:
            continue
        s0 = scores0[h0]
        cells0 = set(h0)
        i = b0[h0]
        for h1, w1 in zip(range1.hands, range1.weights):
            if w1 == 0.0 or cells0 & set(h1):
                continue
            m = w0 * w1
            mass[i, b1[h1]] += m
            s1 = scores1[h1]
            signed[i, b1[h1]] += m * ((s0 > s1) - (s0 < s1))
    total = mass.sum()
    if total <= 0.0:
        raise EndgameError("no card-disjoint hand pair has positive mass")
    ev = np.divide(signed, mass, out=np.zeros_like(signed), where=mass > 0)
    return BucketedEnding(
        names0=tuple(str(i) for i in range(n0)),
        names1=tuple(str(j) for j in range(n1)),
        mass=mass / total,
        ev=ev,
        hand_buckets=(b0, b1),
        equity_fallbacks=(empty0, empty1),
    )


# ── the remaining betting as a solvable tree ───────────────────────


def ending_start_state(
    spec: GameSpec, pot: int, stacks: tuple[int, int], first_to_act: int
) -> HandState:
    if pot <= 0 or pot % 2:
        raise EndgameError("pot must be positive and evenly contributed")
    if min(stacks) < 0:
        raise EndgameError("negative stack")
    rnd = spec.num_rounds - 1
    return HandState(
        spec=spec,
        phase="act",
        round=rnd,
        hands=((), ()),
        board=(),
        stacks=stacks,
        paid=(pot // 2, pot // 2),
        committed=(0, 0),
        to_act=first_to_act,
        acted=(False, False),
        raises_made=0,
        last_increment=0,
        history=("",) * (rnd + 1),
    )


def ending_infoset_key(player: int, bucket_name: str, history: str) -> str:
    return f"p{player}|e{bucket_name}|a{history}"


def build_ending_tree(
    spec: GameSpec,
    grid: ActionGrid | None,
    pot: int,
    stacks: tuple[int, int],
    ending: BucketedEnding,
    first_to_act: int | None = None,
) -> Node:
    """Game tree of the remaining betting round over bucket pairs.

    The root chance node assigns a bucket pair; the betting below follows
    the live rules at the true pot and stacks, with raises discretized by
    the grid.  Fold payoffs and showdown payoffs are measured against the
    even-split baseline, so a player who folds immediately loses the half
    pot they already put in.
    """
    if first_to_act is None:
        first_to_act = first_actor(spec, spec.num_rounds - 1)
    start = ending_start_state(spec, pot, stacks, first_to_act)
    abstraction = Abstraction(grid=grid, buckets=None)
    records: dict[str, InfosetRecord] = {}
    half = pot // 2

    def walk(state: HandState, i: int, j: int) -> Node:
        if state.is_terminal():
            contrib = (
                state.paid[0] + state.committed[0],
                state.paid[1] + state.committed[1],
            )
            if state.phase == "fold":
                value = float(contrib[1]) if state.folded == 1 else -float(contrib[0])
            else:
                value = float(contrib[0]) * float(ending.ev[i, j])
            return Terminal(value)
        player = state.to_act
        bucket = ending.names0[i] if player == 0 else ending.names1[j]
        key = ending_infoset_key(player, bucket, state.history[-1])
        acts = abstract_actions(state, abstraction)
        labels = tuple(tok for tok, _ in acts)
        record = records.get(key)
        if record is None:
            record = InfosetRecord(key, labels)
            records[key] = record
        elif record.labels != labels:
            raise EndgameError(f"inconsistent actions at {key!r}")
        children = [walk(apply_action(state, act), i, j) for _, act in acts]
        return Decision(player, record, children)

    children: list[Node] = []
    probs: list[float] = []
    n0, n1 = ending.mass.shape
    for i in range(n0):
        for j in range(n1):
            p = float(ending.mass[i, j])
            if p > 0.0:
                children.append(walk(start, i, j))
                probs.append(p)
    if not children:
        raise EndgameError("every bucket pair has zero mass")
    return Chance(children, probs)


# ── solving ────────────────────────────────────────────────────────

EQUILIBRIUM_TOLERANCE = 1e-6


@dataclass
class EndgameSolution:
    """Solved ending: equilibrium play for both seats plus diagnostics."""

    value: float  # player-0 chips against the even-split baseline
    pot: int
    stacks: tuple[int, int]
    tables: tuple[StrategyTable, StrategyTable]
    hand_buckets: tuple[dict[tuple[int, ...], int], dict[tuple[int, ...], int]]
    bucket_names: tuple[tuple[str, ...], tuple[str, ...]]
    duality_gap: float
    best_response_gap: float
    ranges: tuple[RangeDistribution, RangeDistribution] | None = None
    equity_fallbacks: tuple[int, int] = (0, 0)
    root: Node = field(repr=False, default=None)

    @property
    def pot_fraction_claim(self) -> float:
        """Player 0's share of the pot under the solution (1/2 is neutral)."""
        return self.value / self.pot + 0.5

    def bucket_of(self, player: int, hand: tuple[int, ...]) -> str:
        try:
            idx = self.hand_buckets[player][tuple(sorted(hand))]
        except KeyError:
            raise EndgameError(f"hand {hand} is not in the solved range") from None
        return self.bucket_names[player][idx]

    def policy(
        self,
        player: int,
        history: str,
        hand: tuple[int, ...] | None = None,
        bucket: str | None = None,
        fallback_labels: tuple[str, ...] | None = None,
    ) -> tuple[tuple[str, ...], list[float], bool]:
        """Action mix at an ending infoset; uniform fallback when unsolved.

        Returns (labels, probabilities, fallback_used).  A lookup can miss
        when the player's hand had zero reach mass, so its bucket never got
        positive probability in the solve.
        """
        table = self.tables[player]
        if bucket is None:
            if hand is None:
                raise EndgameError("need a hand or an explicit bucket")
            try:
                bucket = self.bucket_of(player, hand)
            except EndgameError:
                bucket = None
        if bucket is not None:
            key = ending_infoset_key(player, bucket, history)
            if key in table:
                return table.labels(key), table.probs(key), False
        if fallback_labels is None:
            raise EndgameError("ending has no policy here and no fallback given")
        n = len(fallback_labels)
        return tuple(fallback_labels), [1.0 / n] * n, True


def solve_ending_tree(
    root: Node,
    pot: int,
    stacks: tuple[int, int],
    ending: BucketedEnding | None = None,
    ranges: tuple[RangeDistribution, RangeDistribution] | None = None,
) -> EndgameSolution:
    """Equilibrium of a built ending tree, with a best-response audit."""
    sol = solve_zero_sum(root)
    t0, t1 = solution_tables(root, sol)
    gap = exploitability(root, t0, t1)
    if gap > EQUILIBRIUM_TOLERANCE:
        raise EndgameError(f"solution is exploitable inside the ending: gap {gap}")
    if ending is not None:
        hand_buckets = ending.hand_buckets
        names = (ending.names0, ending.names1)
        fallbacks = ending.equity_fallbacks
    else:
        hand_buckets = ({}, {})
        names = ((), ())
        fallbacks = (0, 0)
    return EndgameSolution(
        value=sol.value,
        pot=pot,
        stacks=stacks,
        tables=(t0, t1),
        hand_buckets=hand_buckets,
        bucket_names=names,
        duality_gap=sol.duality_gap,
        best_response_gap=gap,
        ranges=ranges,
        equity_fallbacks=fallbacks,
        root=root,
    )


def solve_endgame(
    spec: GameSpec,
    abstraction: Abstraction,
    table0: StrategyTable,
    table1: StrategyTable,
    board_by_round: tuple[tuple[int, ...], ...],
    history: tuple[str, ...],
    pot: int,
    stacks: tuple[int, int],
    k: int = 8,
    grid: ActionGrid | None = None,
) -> EndgameSolution:
    """Re-solve the final betting round of a live hand.

    The line and board feed the hand distributions; ``pot`` and ``stacks``
    are the real table amounts, which may differ from what the earlier-round
    model believed if off-menu bets were mapped to nearby sizes.
    """
    range0, range1 = compute_reach_ranges(
        spec, abstraction, table0, table1, board_by_round, history
    )
    board = tuple(c for cards in board_by_round for c in cards)
    ending = bucket_ending(spec, board, range0, range1, k)
    tree_grid = grid if grid is not None else abstraction.grid
    root = build_ending_tree(spec, tree_grid, pot, stacks, ending)
    return solve_ending_tree(root, pot, stacks, ending, (range0, range1))


# ── constructed endings with known play ────────────────────────────


def clairvoyance_ending(bet_multiple: float = 1.0) -> EndgameSolution:
    """Polarized one-street ending: bettor holds the winner or the loser.

    Player 0 knows which; player 1 holds a medium hand and only faces one
    decision.  The single bet size is all-in for ``bet_multiple`` times the
    pot.  Known play: player 0 always bets the winner and bluffs the loser
    b/(b+2) of the time (b in half-pots), player 1 calls 2/(b+2), and the
    pot share of player 0 comes to (1/2)(1 + m/(m+1)) for multiple m.
    """
    if bet_multiple <= 0:
        raise EndgameError("bet multiple must be positive")
    pot = 2
    stack = round(bet_multiple * pot)
    if abs(stack - bet_multiple * pot) > 1e-9:
        raise EndgameError("bet multiple must give a whole-chip stack")
    spec = _one_street_spec(extra="clairvoyance")
    grid = ActionGrid(open_fractions=((np.inf,),), raise_fractions=((np.inf,),))
    ending = BucketedEnding(
        names0=("win", "lose"),
        names1=("mid",),
        mass=np.array([[0.5], [0.5]]),
        ev=np.array([[1.0], [-1.0]]),
        hand_buckets=({}, {}),
        equity_fallbacks=(0, 0),
    )
    root = build_ending_tree(spec, grid, pot, (stack, stack), ending, first_to_act=0)
    return solve_ending_tree(root, pot, (stack, stack), ending)


def _one_street_spec(extra: str) -> GameSpec:
    from .game import preset

    base = preset("kuhn")
    return replace(
        base,
        name=f"ending-{extra}",
        bet_structure="no_limit",
        fixed_bets=None,
        max_raises_per_round=None,
        starting_stack=10**9,
    )


def sequential_rps_tree() -> Node:
    """Rock-paper-scissors played in sequence but unobserved.

    The second mover's three decision nodes share one information set, so
    moving later confers nothing; the game value stays zero.
    """
    payoff = ((0.0, -1.0, 1.0), (1.0, 0.0, -1.0), (-1.0, 1.0, 0.0))
    moves = ("rock", "paper", "scissors")
    rec0 = InfosetRecord("p0|rps|a:", moves)
    rec1 = InfosetRecord("p1|rps|a:unseen", moves)
    subtrees = [
        Decision(1, rec1, [Terminal(payoff[i][j]) for j in range(3)])
        for i in range(3)
    ]
    return Decision(0, rec0, subtrees)


def solve_sequential_rps() -> tuple[EndgameSolution, float]:
    """Solve the unobserved-sequence game; also report its exploitability."""
    root = sequential_rps_tree()
    sol = solve_zero_sum(root)
    t0, t1 = solution_tables(root, sol)
    gap = exploitability(root, t0, t1)
    solution = EndgameSolution(
        value=sol.value,
        pot=2,
        stacks=(0, 0),
        tables=(t0, t1),
        hand_buckets=({}, {}),
        bucket_names=(("move",), ("move",)),
        duality_gap=sol.duality_gap,
        best_response_gap=gap,
        root=root,
    )
    return solution, gap
