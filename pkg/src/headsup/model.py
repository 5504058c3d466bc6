"""Materialized game trees over the rules engine plus an abstraction.

The solver stack (regret minimization, best response, expected value, and the
sequence-form LP) all walk the same three node kinds.  Trees for the desk
presets are small enough to build eagerly; a node-count guard protects
against accidentally materializing a game that is not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .abstraction import Abstraction, AbstractionError, private_state_key
from .game import (
    ActionDescriptor,
    ActionKind,
    GameSpec,
    HandState,
    apply_action,
    apply_chance,
    enumerate_chance,
    infoset_key,
    legal_actions,
    new_hand,
    terminal_value,
)

NODE_LIMIT = 2_000_000


class ModelError(ValueError):
    """Raised when a tree cannot be materialized faithfully."""


class Terminal:
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = value  # payoff to player 0


class Chance:
    __slots__ = ("children", "probs")

    def __init__(self, children: list, probs: list[float]):
        self.children = children
        self.probs = probs


class InfosetRecord:
    """Shared per-infoset accumulators for regret minimization."""

    __slots__ = ("key", "labels", "regret", "strat_sum", "stamp", "current")

    def __init__(self, key: str, labels: tuple[str, ...]):
        self.key = key
        self.labels = labels
        n = len(labels)
        self.regret = [0.0] * n
        self.strat_sum = [0.0] * n
        self.stamp = -1
        self.current = [1.0 / n] * n


class Decision:
    __slots__ = ("player", "record", "children")

    def __init__(self, player: int, record: InfosetRecord, children: list):
        self.player = player
        self.record = record
        self.children = children


Node = Terminal | Chance | Decision


@dataclass
class GameTree:
    root: Node
    infosets: dict[str, InfosetRecord]
    spec: GameSpec | None = None
    abstraction: Abstraction | None = None
    node_count: int = 0


def abstract_actions(
    state: HandState, abstraction: Abstraction
) -> list[tuple[str, ActionDescriptor]]:
    """Labelled concrete actions available under the abstraction.

    Fold and check/call pass through.  For no-limit states the grid's pot
    fractions are converted to raise-to targets against the current pot and
    clamped into the legal interval; a missing grid on a no-limit game is an
    error since the raise continuum cannot be enumerated.
    """
    out: list[tuple[str, ActionDescriptor]] = []
    interval: ActionDescriptor | None = None
    for act in legal_actions(state):
        if act.kind is ActionKind.RAISE and act.amount is None:
            interval = act
            continue
        out.append((act.token(), act))
    if interval is not None:
        if abstraction.grid is None:
            raise ModelError(
                "no-limit game requires an action grid to discretize raises"
            )
        from .abstraction import concrete_bet_sizes

        facing = state.to_call() > 0
        fractions = abstraction.grid.for_situation(state.round, facing)
        level = max(state.committed)
        assert interval.min_to is not None and interval.max_to is not None
        sizes = concrete_bet_sizes(
            fractions,
            pot=state.pot,
            min_legal=interval.min_to - level,
            stack=interval.max_to - level,
        )
        for wager in sizes:
            to = level + wager
            out.append((f"r{to}", ActionDescriptor(ActionKind.RAISE, amount=to)))
    return out


def bucket_for(state: HandState, player: int, abstraction: Abstraction) -> str | None:
    if abstraction.buckets is None:
        return None
    deck = state.spec.deck()
    key = private_state_key(deck, state.hands[player], state.board)
    return abstraction.buckets.bucket_label(state.round, key)


def model_infoset_key(state: HandState, player: int, abstraction: Abstraction) -> str:
    return infoset_key(state, player, bucket=bucket_for(state, player, abstraction))


def build_tree(
    spec: GameSpec,
    abstraction: Abstraction | None = None,
    root_state: HandState | None = None,
    node_limit: int = NODE_LIMIT,
) -> GameTree:
    """Materialize the (abstracted) game tree from ``root_state`` down."""
    from .abstraction import LOSSLESS

    abstraction = abstraction or LOSSLESS
    infosets: dict[str, InfosetRecord] = {}
    count = 0

    def walk(state: HandState) -> Node:
        nonlocal count
        count += 1
        if count > node_limit:
            raise ModelError(f"tree exceeds the {node_limit}-node guard")
        if state.is_terminal():
            return Terminal(float(terminal_value(state)))
        if state.phase == "chance":
            children = []
            probs = []
            for outcome, p in enumerate_chance(spec, state.round, state):
                children.append(walk(apply_chance(state, outcome)))
                probs.append(p)
            return Chance(children, probs)
        labelled = abstract_actions(state, abstraction)
        if not labelled:
            raise ModelError("decision state with no abstract actions")
        player = state.to_act
        key = model_infoset_key(state, player, abstraction)
        labels = tuple(lbl for lbl, _ in labelled)
        rec = infosets.get(key)
        if rec is None:
            rec = InfosetRecord(key, labels)
            infosets[key] = rec
        elif rec.labels != labels:
            raise ModelError(f"inconsistent actions across infoset {key!r}")
        children = [walk(apply_action(state, act)) for _, act in labelled]
        return Decision(player, rec, children)

    root = walk(root_state if root_state is not None else new_hand(spec))
    return GameTree(
        root=root,
        infosets=infosets,
        spec=spec,
        abstraction=abstraction,
        node_count=count,
    )


def make_decision(player: int, key: str, labels: tuple[str, ...], children: list) -> Decision:
    """Hand-built decision node (for synthetic games in tests and demos)."""
    return Decision(player, InfosetRecord(key, labels), children)


def collect_infosets(root: Node) -> dict[str, InfosetRecord]:
    out: dict[str, InfosetRecord] = {}

    def walk(node: Node) -> None:
        if isinstance(node, Decision):
            prior = out.get(node.record.key)
            if prior is None:
                out[node.record.key] = node.record
            elif prior is not node.record:
                raise ModelError(f"duplicate records for infoset {node.record.key!r}")
            for ch in node.children:
                walk(ch)
        elif isinstance(node, Chance):
            for ch in node.children:
                walk(ch)

    walk(root)
    return out


def fix_player(root: Node, player: int, probs_for: dict[str, list[float]]) -> Node:
    """Replace ``player``'s decisions with chance moves from a policy table.

    Used to solve the remainder of a game with one side frozen (for example
    re-solving an ending against a fixed earlier-stage strategy).
    """

    def walk(node: Node) -> Node:
        if isinstance(node, Terminal):
            return node
        if isinstance(node, Chance):
            return Chance([walk(c) for c in node.children], list(node.probs))
        children = [walk(c) for c in node.children]
        if node.player != player:
            return Decision(node.player, node.record, children)
        try:
            probs = probs_for[node.record.key]
        except KeyError:
            raise ModelError(f"fixed policy missing infoset {node.record.key!r}") from None
        if len(probs) != len(children):
            raise ModelError(f"policy arity mismatch at {node.record.key!r}")
        return Chance(children, [float(p) for p in probs])

    return walk(root)
