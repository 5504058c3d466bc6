"""Exact zero-sum solving: sequence-form LP over trees, plus matrix games.

The sequence-form encoding keeps one variable per (infoset, action) pair and
one realization-plan constraint per infoset, so tree games solve in
polynomial size.  Both players' LPs are solved independently with HiGHS and
the duality gap is checked, which doubles as a correctness guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .model import Chance, Decision, Node, Terminal

SEQUENCE_GUARD = 10_000
DUALITY_TOLERANCE = 1e-6


class SeqFormError(RuntimeError):
    """Raised when the LP cannot be built or solved within guards."""


@dataclass
class _PlayerForm:
    # sequence 0 is the empty sequence
    seq_count: int = 1
    infoset_parent: dict[str, int] = field(default_factory=dict)
    infoset_labels: dict[str, tuple[str, ...]] = field(default_factory=dict)
    seq_of: dict[tuple[str, int], int] = field(default_factory=dict)

    def register(self, key: str, labels: tuple[str, ...], parent_seq: int) -> None:
        seen = self.infoset_parent.get(key)
        if seen is None:
            self.infoset_parent[key] = parent_seq
            self.infoset_labels[key] = labels
            for i in range(len(labels)):
                self.seq_of[(key, i)] = self.seq_count
                self.seq_count += 1
            if self.seq_count > SEQUENCE_GUARD:
                raise SeqFormError(
                    f"sequence count exceeds the {SEQUENCE_GUARD} guard"
                )
        elif seen != parent_seq:
            raise SeqFormError(f"imperfect recall at infoset {key!r}")


@dataclass
class SeqFormSolution:
    value: float  # player-0 game value
    strategies: tuple[dict[str, list[float]], dict[str, list[float]]]
    labels: tuple[dict[str, tuple[str, ...]], dict[str, tuple[str, ...]]]
    realization_plans: tuple[dict[int, float], dict[int, float]]
    duality_gap: float
    sequence_counts: tuple[int, int]
    plan_residuals: tuple[float, float]

    def policy(self, player: int) -> dict[str, list[float]]:
        return self.strategies[player]


def _build_forms(root: Node) -> tuple[_PlayerForm, _PlayerForm, dict]:
    forms = (_PlayerForm(), _PlayerForm())
    payoff: dict[tuple[int, int], float] = {}

    def walk(node: Node, seq0: int, seq1: int, reach: float) -> None:
        if isinstance(node, Terminal):
            k = (seq0, seq1)
            payoff[k] = payoff.get(k, 0.0) + reach * node.value
            return
        if isinstance(node, Chance):
            for child, p in zip(node.children, node.probs):
                if p != 0.0:
                    walk(child, seq0, seq1, reach * p)
            return
        rec = node.record
        form = forms[node.player]
        parent = seq0 if node.player == 0 else seq1
        form.register(rec.key, rec.labels, parent)
        for i, child in enumerate(node.children):
            s = form.seq_of[(rec.key, i)]
            if node.player == 0:
                walk(child, s, seq1, reach)
            else:
                walk(child, seq0, s, reach)

    walk(root, 0, 0, 1.0)
    return forms[0], forms[1], payoff


def _constraints(form: _PlayerForm) -> tuple[sparse.csr_matrix, np.ndarray]:
    rows = 1 + len(form.infoset_parent)
    mat = sparse.lil_matrix((rows, form.seq_count))
    rhs = np.zeros(rows)
    mat[0, 0] = 1.0
    rhs[0] = 1.0
    for r, (key, parent) in enumerate(form.infoset_parent.items(), start=1):
        mat[r, parent] = -1.0
        for i in range(len(form.infoset_labels[key])):
            mat[r, form.seq_of[(key, i)]] = 1.0
    return mat.tocsr(), rhs


def _payoff_matrix(payoff: dict, n0: int, n1: int) -> sparse.csr_matrix:
    if not payoff:
        raise SeqFormError("game has no terminal payoffs")
    rows, cols, vals = [], [], []
    for (s0, s1), v in payoff.items():
        rows.append(s0)
        cols.append(s1)
        vals.append(v)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n0, n1))


def _solve_one_side(
    A: sparse.csr_matrix,
    E: sparse.csr_matrix,
    e: np.ndarray,
    F: sparse.csr_matrix,
    f: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Maximizing player's plan x and value via max f'q st F'q <= A'x, Ex = e."""
    n0 = A.shape[0]
    nq = F.shape[0]
    c = np.concatenate([np.zeros(n0), -f])
    A_ub = sparse.hstack([-A.T, F.T], format="csr")
    b_ub = np.zeros(A.shape[1])
    A_eq = sparse.hstack([E, sparse.csr_matrix((E.shape[0], nq))], format="csr")
    bounds = [(0, None)] * n0 + [(None, None)] * nq
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=e, bounds=bounds, method="highs"
    )
    if not res.success:
        raise SeqFormError(f"LP failed: {res.message}")
    x = res.x[:n0]
    return x, -res.fun


def _behavior_from_plan(form: _PlayerForm, x: np.ndarray) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for key, labels in form.infoset_labels.items():
        parent = form.infoset_parent[key]
        mass = x[parent]
        n = len(labels)
        if mass > 1e-12:
            probs = [max(0.0, x[form.seq_of[(key, i)]]) / mass for i in range(n)]
            total = sum(probs)
            probs = [p / total for p in probs] if total > 0 else [1.0 / n] * n
        else:
            probs = [1.0 / n] * n
        out[key] = probs
    return out


def solve_zero_sum(root: Node) -> SeqFormSolution:
    """Exact equilibrium of the tree game rooted at ``root``.

    Solves the sequence-form LP once per player, cross-checks the duality
    gap, and verifies both realization plans satisfy their flow constraints.
    """
    form0, form1, payoff = _build_forms(root)
    A = _payoff_matrix(payoff, form0.seq_count, form1.seq_count)
    E, e = _constraints(form0)
    F, f = _constraints(form1)

    x, value0 = _solve_one_side(A, E, e, F, f)
    # Player 1 maximizes -A' in the transposed game.
    y, value1_neg = _solve_one_side(-A.T, F, f, E, e)
    value1 = -value1_neg

    gap = abs(value0 - value1)
    if gap > DUALITY_TOLERANCE:
        raise SeqFormError(f"duality gap {gap:.3e} exceeds {DUALITY_TOLERANCE}")

    res0 = float(np.max(np.abs(E @ x - e))) if form0.seq_count else 0.0
    res1 = float(np.max(np.abs(F @ y - f))) if form1.seq_count else 0.0

    return SeqFormSolution(
        value=0.5 * (value0 + value1),
        strategies=(_behavior_from_plan(form0, x), _behavior_from_plan(form1, y)),
        labels=(form0.infoset_labels, form1.infoset_labels),
        realization_plans=(
            {i: float(v) for i, v in enumerate(x)},
            {i: float(v) for i, v in enumerate(y)},
        ),
        duality_gap=gap,
        sequence_counts=(form0.seq_count, form1.seq_count),
        plan_residuals=(res0, res1),
    )


def solution_tables(root: Node, sol: SeqFormSolution):
    """Pack both equilibrium policies into StrategyTable objects."""
    from .strategy import StrategyTable

    tables = []
    for p in (0, 1):
        t = StrategyTable(variant="seqform-lp")
        for key, labels in sol.labels[p].items():
            t.set(key, labels, sol.strategies[p][key])
        tables.append(t)
    return tables[0], tables[1]


# ── matrix games ───────────────────────────────────────────────────


def solve_matrix_game(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact equilibrium (row mix, column mix, value) of a zero-sum matrix.

    Row player maximizes A; column player minimizes.  Both sides solve with
    HiGHS and the duality gap is asserted tiny.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    # Row: max v st A' x >= v, sum x = 1
    c = np.concatenate([np.zeros(m), [-1.0]])
    A_ub = np.hstack([-A.T, np.ones((n, 1))])
    A_eq = np.concatenate([np.ones(m), [0.0]]).reshape(1, -1)
    res_x = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(n),
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * m + [(None, None)],
        method="highs",
    )
    if not res_x.success:
        raise SeqFormError(f"matrix LP failed: {res_x.message}")
    x, v_row = res_x.x[:m], -res_x.fun
    # Column: min w st A y <= w, sum y = 1
    c2 = np.concatenate([np.zeros(n), [1.0]])
    A_ub2 = np.hstack([A, -np.ones((m, 1))])
    A_eq2 = np.concatenate([np.ones(n), [0.0]]).reshape(1, -1)
    res_y = linprog(
        c2,
        A_ub=A_ub2,
        b_ub=np.zeros(m),
        A_eq=A_eq2,
        b_eq=[1.0],
        bounds=[(0, None)] * n + [(None, None)],
        method="highs",
    )
    if not res_y.success:
        raise SeqFormError(f"matrix LP failed: {res_y.message}")
    y, v_col = res_y.x[:n], res_y.fun
    if abs(v_row - v_col) > DUALITY_TOLERANCE:
        raise SeqFormError(f"matrix duality gap {abs(v_row - v_col):.3e}")
    return x, y, 0.5 * (v_row + v_col)
