"""Exact evaluation: expected value, best response, exploitability.

Everything here does full-tree traversal, so it is exact up to float
arithmetic.  Best response maximizes per information set against a fixed
opponent policy: node values under the responder's optimal continuation are
memoized, and the optimal action at an infoset weighs every node in the set
by chance-times-opponent reach.
"""

from __future__ import annotations

from .model import Chance, Decision, Node, Terminal
from .strategy import StrategyTable


def _probs(table: StrategyTable, rec) -> list[float]:
    probs = table.probs(rec.key)
    if len(probs) != len(rec.labels):
        raise ValueError(f"arity mismatch for infoset {rec.key!r}")
    return probs


def expected_value(root: Node, table0: StrategyTable, table1: StrategyTable) -> float:
    """Player-0 expected value when both players follow the given tables."""

    def walk(node: Node) -> float:
        if isinstance(node, Terminal):
            return node.value
        if isinstance(node, Chance):
            return sum(p * walk(c) for c, p in zip(node.children, node.probs))
        table = table0 if node.player == 0 else table1
        probs = _probs(table, node.record)
        return sum(p * walk(c) for c, p in zip(node.children, probs) if p != 0.0)

    return walk(root)


def best_response_value(root: Node, opponent: StrategyTable, br_player: int) -> float:
    """Value (from the responder's perspective) of the exact best response."""
    # Pass 1: reach-weighted membership of every responder decision node.
    members: dict[str, list[tuple[Decision, float]]] = {}

    def gather(node: Node, reach: float) -> None:
        if isinstance(node, Terminal):
            return
        if isinstance(node, Chance):
            for c, p in zip(node.children, node.probs):
                gather(c, reach * p)
            return
        if node.player == br_player:
            members.setdefault(node.record.key, []).append((node, reach))
            for c in node.children:
                gather(c, reach)
            return
        probs = _probs(opponent, node.record)
        for c, p in zip(node.children, probs):
            if p != 0.0:
                gather(c, reach * p)

    gather(root, 1.0)

    # Pass 2: responder-perspective node values under the optimal policy.
    sign = 1.0 if br_player == 0 else -1.0
    choice: dict[str, int] = {}
    value_memo: dict[int, float] = {}

    def value(node: Node) -> float:
        nid = id(node)
        got = value_memo.get(nid)
        if got is not None:
            return got
        if isinstance(node, Terminal):
            v = sign * node.value
        elif isinstance(node, Chance):
            v = sum(p * value(c) for c, p in zip(node.children, node.probs))
        elif node.player == br_player:
            v = value(node.children[action_at(node.record.key)])
        else:
            probs = _probs(opponent, node.record)
            v = sum(p * value(c) for c, p in zip(node.children, probs) if p != 0.0)
        value_memo[nid] = v
        return v

    def action_at(key: str) -> int:
        got = choice.get(key)
        if got is not None:
            return got
        nodes = members.get(key)
        if not nodes:
            # Unreachable given the opponent policy; any action is fine.
            choice[key] = 0
            return 0
        n_actions = len(nodes[0][0].children)
        best_i, best_v = 0, float("-inf")
        for i in range(n_actions):
            total = 0.0
            for node, w in nodes:
                total += w * value(node.children[i])
            if total > best_v + 1e-13:
                best_v, best_i = total, i
        choice[key] = best_i
        return best_i

    return value(root)


def exploitability(root: Node, table0: StrategyTable, table1: StrategyTable | None = None) -> float:
    """Average best-response gain against the profile; 0 at equilibrium.

    With one table given, it is used for both seats.
    """
    t1 = table1 if table1 is not None else table0
    gain0 = best_response_value(root, t1, br_player=0)
    gain1 = best_response_value(root, table0, br_player=1)
    return 0.5 * (gain0 + gain1)
