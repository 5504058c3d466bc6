"""Counterfactual-regret minimization over materialized game trees.

Two variants: ``vanilla`` walks every chance outcome each iteration and is
exact; ``chance_sampled`` draws one deal per iteration and scales.  Regret
matching drives the current profile; the reported strategy is the linearly
weighted average.  Checkpoints snapshot the average at powers of ten so a
convergence trail comes for free.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .abstraction import Abstraction
from .game import GameSpec
from .model import Chance, Decision, GameTree, Terminal, build_tree
from .strategy import StrategyTable


@dataclass
class CfrRun:
    """Training output: final average strategy plus checkpoint snapshots."""

    strategy: StrategyTable
    checkpoints: dict[int, StrategyTable] = field(default_factory=dict)
    iterations: int = 0
    variant: str = "vanilla"
    tree: GameTree | None = None


def _regret_matching(rec, stamp: int) -> list[float]:
    if rec.stamp == stamp:
        return rec.current
    regret = rec.regret
    total = 0.0
    for r in regret:
        if r > 0.0:
            total += r
    if total > 0.0:
        cur = [r / total if r > 0.0 else 0.0 for r in regret]
    else:
        n = len(regret)
        cur = [1.0 / n] * n
    rec.current = cur
    rec.stamp = stamp
    return cur


def _walk_vanilla(node, r0: float, r1: float, rc: float, stamp: int) -> float:
    """Returns player-0 expected value; updates both players' accumulators."""
    if type(node) is Terminal:
        return node.value
    if type(node) is Chance:
        total = 0.0
        children = node.children
        probs = node.probs
        for i in range(len(children)):
            p = probs[i]
            total += p * _walk_vanilla(children[i], r0, r1, rc * p, stamp)
        return total
    rec = node.record
    sigma = _regret_matching(rec, stamp)
    children = node.children
    n = len(children)
    utils = [0.0] * n
    value = 0.0
    player = node.player
    if player == 0:
        for i in range(n):
            s = sigma[i]
            u = _walk_vanilla(children[i], r0 * s, r1, rc, stamp)
            utils[i] = u
            value += s * u
        cf = rc * r1
        regret = rec.regret
        strat = rec.strat_sum
        for i in range(n):
            regret[i] += cf * (utils[i] - value)
            strat[i] += r0 * sigma[i]
    else:
        for i in range(n):
            s = sigma[i]
            u = _walk_vanilla(children[i], r0, r1 * s, rc, stamp)
            utils[i] = u
            value += s * u
        cf = rc * r0
        regret = rec.regret
        strat = rec.strat_sum
        for i in range(n):
            regret[i] += cf * (value - utils[i])  # player 1 maximizes -u
            strat[i] += r1 * sigma[i]
    return value


def _walk_sampled(node, r0: float, r1: float, stamp: int, rng_random) -> float:
    if type(node) is Terminal:
        return node.value
    if type(node) is Chance:
        probs = node.probs
        u = rng_random()
        acc = 0.0
        idx = len(probs) - 1
        for i in range(len(probs)):
            acc += probs[i]
            if u < acc:
                idx = i
                break
        return _walk_sampled(node.children[idx], r0, r1, stamp, rng_random)
    rec = node.record
    sigma = _regret_matching(rec, stamp)
    children = node.children
    n = len(children)
    utils = [0.0] * n
    value = 0.0
    player = node.player
    if player == 0:
        for i in range(n):
            s = sigma[i]
            u = _walk_sampled(children[i], r0 * s, r1, stamp, rng_random)
            utils[i] = u
            value += s * u
        cf = r1
        regret = rec.regret
        strat = rec.strat_sum
        for i in range(n):
            regret[i] += cf * (utils[i] - value)
            strat[i] += r0 * sigma[i]
    else:
        for i in range(n):
            s = sigma[i]
            u = _walk_sampled(children[i], r0, r1 * s, stamp, rng_random)
            utils[i] = u
            value += s * u
        cf = r0
        regret = rec.regret
        strat = rec.strat_sum
        for i in range(n):
            regret[i] += cf * (value - utils[i])
            strat[i] += r1 * sigma[i]
    return value


def average_strategy(tree: GameTree, iterations: int, variant: str, seed: int | None) -> StrategyTable:
    """Normalized linear-average strategy; unvisited infosets stay uniform."""
    table = StrategyTable(
        spec_hash=tree.spec.spec_hash() if tree.spec else "",
        abstraction_hash=tree.abstraction.abstraction_hash() if tree.abstraction else "",
        iterations=iterations,
        variant=variant,
        seed=seed,
    )
    for key, rec in tree.infosets.items():
        total = sum(rec.strat_sum)
        n = len(rec.labels)
        if total > 0.0:
            probs = [s / total for s in rec.strat_sum]
        else:
            probs = [1.0 / n] * n
        table.set(key, rec.labels, probs)
    return table


def power_of_ten_checkpoints(limit: int) -> list[int]:
    out = []
    t = 1
    while t <= limit:
        out.append(t)
        t *= 10
    return out


def run_cfr(
    spec: GameSpec | None = None,
    abstraction: Abstraction | None = None,
    iterations: int = 1000,
    variant: str = "vanilla",
    seed: int | None = None,
    tree: GameTree | None = None,
    checkpoint_at: list[int] | None = None,
) -> CfrRun:
    """Train on a preset (or a prebuilt tree) and return the averaged run.

    ``vanilla`` is deterministic; ``chance_sampled`` requires a seed and is
    deterministic for a fixed seed.  Checkpoints default to powers of ten.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    if tree is None:
        if spec is None:
            raise ValueError("either a spec or a prebuilt tree is required")
        tree = build_tree(spec, abstraction)
    if variant not in ("vanilla", "chance_sampled"):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "chance_sampled" and seed is None:
        raise ValueError("chance_sampled requires a seed")
    marks = sorted(set(checkpoint_at or power_of_ten_checkpoints(iterations)))
    run = CfrRun(strategy=StrategyTable(), variant=variant, tree=tree)
    rng_random = random.Random(seed).random if seed is not None else None
    root = tree.root
    for t in range(1, iterations + 1):
        if variant == "vanilla":
            _walk_vanilla(root, 1.0, 1.0, 1.0, t)
        else:
            assert rng_random is not None
            _walk_sampled(root, 1.0, 1.0, t, rng_random)
        if marks and t == marks[0]:
            marks.pop(0)
            run.checkpoints[t] = average_strategy(tree, t, variant, seed)
    run.iterations = iterations
    run.strategy = run.checkpoints.get(iterations) or average_strategy(
        tree, iterations, variant, seed
    )
    return run
