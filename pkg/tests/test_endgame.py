"""Final-round re-solving: ranges, equities, bucket games, known endings."""

import itertools
import random

import numpy as np
import pytest

from headsup.abstraction import LOSSLESS, ActionGrid
from headsup.endgame import (
    EndgameError,
    RangeDistribution,
    bucket_ending,
    build_ending_tree,
    clairvoyance_ending,
    compute_reach_ranges,
    conditional_equities,
    sequential_rps_tree,
    showdown_score,
    solve_endgame,
    solve_sequential_rps,
)
from headsup.game import (
    DealOutcome,
    apply_action,
    apply_chance,
    action_from_token,
    evaluate_showdown,
    legal_actions,
    new_hand,
    preset,
    split_action_tokens,
)
from headsup.model import build_tree, model_infoset_key
from headsup.strategy import uniform_table_for

LEDUC = preset("leduc")
MINI = preset("mini")

# Leduc card ids (rank-major over JQK x sh)
JS, JH, QS, QH, KS, KH = range(6)


def leduc_uniform_tables():
    tree = build_tree(LEDUC)
    t = uniform_table_for(tree.infosets)
    return tree, t


def preflop_lines(spec):
    """Every round-0 action string that reaches the final round."""
    state = new_hand(spec)
    deck_size = len(spec.ranks) * len(spec.suits)
    cards = list(range(deck_size))
    p = spec.private_cards
    state = apply_chance(
        state,
        DealOutcome(
            hands=(tuple(cards[:p]), tuple(cards[p : 2 * p])),
            board=tuple(cards[2 * p : 2 * p + spec.board_per_round[0]]),
        ),
    )
    lines = []

    def walk(s):
        if s.phase == "chance":
            lines.append(s.history[0])
            return
        if s.is_terminal():
            return
        for act in legal_actions(s):
            walk(apply_action(s, act))

    walk(state)
    return sorted(set(lines))


# ── reach ranges ───────────────────────────────────────────────────


def test_uniform_trunk_gives_uniform_ranges():
    _, t = leduc_uniform_tables()
    r0, r1 = compute_reach_ranges(LEDUC, LOSSLESS, t, t, ((), (QH,)), ("xx",))
    assert r0.hands == ((JS,), (JH,), (QS,), (KS,), (KH,))
    assert r0.weights == pytest.approx((0.2,) * 5)
    assert r1.weights == pytest.approx((0.2,) * 5)
    assert not r0.used_fallback and not r1.used_fallback


def test_biased_trunk_shifts_range():
    _, t = leduc_uniform_tables()
    t0 = uniform_table_for(build_tree(LEDUC).infosets)
    # player 0 never checks Js preflop
    key = "p0|r0|hJs|b|a"
    assert t0.labels(key) == ("x", "r2")
    t0.set(key, ("x", "r2"), [0.0, 1.0])
    r0, r1 = compute_reach_ranges(LEDUC, LOSSLESS, t0, t, ((), (QH,)), ("xx",))
    assert r0.weight_of((JS,)) == 0.0
    assert r0.weight_of((KS,)) == pytest.approx(0.25)
    assert r1.weights == pytest.approx((0.2,) * 5)


def test_zero_reach_falls_back_to_prior():
    _, t = leduc_uniform_tables()
    t0 = uniform_table_for(build_tree(LEDUC).infosets)
    for key in list(t0.entries):
        if key.startswith("p0|r0|") and key.endswith("|a"):
            t0.set(key, ("x", "r2"), [0.0, 1.0])  # never checks anything
    r0, _ = compute_reach_ranges(LEDUC, LOSSLESS, t0, t, ((), (QH,)), ("xx",))
    assert r0.used_fallback
    assert r0.truncated_steps == 1
    assert r0.weights == pytest.approx((0.2,) * 5)


def test_range_input_validation():
    _, t = leduc_uniform_tables()
    with pytest.raises(EndgameError):
        compute_reach_ranges(LEDUC, LOSSLESS, t, t, ((), ()), ("xx",))
    with pytest.raises(EndgameError):
        compute_reach_ranges(LEDUC, LOSSLESS, t, t, ((), (QH,)), ("xx", "xx"))
    # trailing empty final-round entry is accepted
    r0, _ = compute_reach_ranges(LEDUC, LOSSLESS, t, t, ((), (QH,)), ("xx", ""))
    assert sum(r0.weights) == pytest.approx(1.0)


# ── independent oracle: full joint reach, then marginalize ─────────


def _own_probs(spec, table, player, hand, board_by_round, line):
    """Product of one player's action probabilities along the line."""
    used = set(hand) | {c for b in board_by_round for c in b}
    free = [c for c in range(len(spec.ranks) * len(spec.suits)) if c not in used]
    opp = tuple(free[: spec.private_cards])
    hands = (hand, opp) if player == 0 else (opp, hand)
    state = apply_chance(new_hand(spec), DealOutcome(hands=hands, board=board_by_round[0]))
    out = 1.0
    for tok in split_action_tokens(line):
        if state.to_act == player:
            out *= table.prob(model_infoset_key(state, player, LOSSLESS), tok)
        state = apply_action(state, action_from_token(tok))
    return out


def _pair_probs(spec, t0, t1, h0, h1, board_by_round, line):
    """Joint replay of a disjoint hand pair, multiplying whoever acts."""
    state = apply_chance(new_hand(spec), DealOutcome(hands=(h0, h1), board=board_by_round[0]))
    out = 1.0
    for tok in split_action_tokens(line):
        table = t0 if state.to_act == 0 else t1
        out *= table.prob(model_infoset_key(state, state.to_act, LOSSLESS), tok)
        state = apply_action(state, action_from_token(tok))
    return out


def _random_tables(rng):
    tree = build_tree(LEDUC)
    t0 = uniform_table_for(tree.infosets)
    t1 = uniform_table_for(tree.infosets)
    for t in (t0, t1):
        for key, (labels, _) in list(t.entries.items()):
            raw = [rng.random() + 1e-3 for _ in labels]
            s = sum(raw)
            t.set(key, labels, [v / s for v in raw])
    return t0, t1


def test_linear_ranges_match_quadratic_joint():
    rng = random.Random(20260822)
    lines = preflop_lines(LEDUC)
    for _ in range(25):
        t0, t1 = _random_tables(rng)
        line = rng.choice(lines)
        board = (rng.randrange(6),)
        board_by_round = ((), board)
        r0, r1 = compute_reach_ranges(LEDUC, LOSSLESS, t0, t1, board_by_round, (line,))
        hands = r0.hands
        n = len(hands)
        joint = np.zeros((n, n))
        for i, h0 in enumerate(hands):
            for j, h1 in enumerate(hands):
                if set(h0) & set(h1):
                    # overlapping hands cannot be dealt together; the joint
                    # replay factors into independent per-player products
                    joint[i, j] = _own_probs(
                        LEDUC, t0, 0, h0, board_by_round, line
                    ) * _own_probs(LEDUC, t1, 1, h1, board_by_round, line)
                else:
                    joint[i, j] = _pair_probs(LEDUC, t0, t1, h0, h1, board_by_round, line)
        joint /= joint.sum()
        np.testing.assert_allclose(joint.sum(axis=1), r0.weights, atol=1e-10)
        np.testing.assert_allclose(joint.sum(axis=0), r1.weights, atol=1e-10)


# ── conditional equities ───────────────────────────────────────────


def uniform_range(hands):
    hands = tuple(tuple(sorted(h)) for h in hands)
    return RangeDistribution(hands=hands, weights=(1.0 / len(hands),) * len(hands))


def test_leduc_conditional_equity_with_removal():
    opp = uniform_range([(JS,), (JH,), (QS,), (KS,), (KH,)])
    eqs, empty = conditional_equities(LEDUC, (QH,), ((KS,), (QS,), (JS,)), opp)
    # holding Ks: opponent renormalizes to {Js, Jh, Qs, Kh}
    assert eqs[0] == pytest.approx((1 + 1 + 0 + 0.5) / 4)
    assert eqs[1] == pytest.approx(1.0)  # board-paired queen beats everything left
    assert eqs[2] == pytest.approx(0.5 / 4)  # jack only ties the other jack
    assert empty == 0


def test_equity_empty_conditional_range_flagged():
    opp = uniform_range([(KS,)])
    eqs, empty = conditional_equities(LEDUC, (QH,), ((KS,),), opp)
    assert eqs == [0.5]
    assert empty == 1


def test_mini_equity_blocks_shared_cards():
    deck = MINI.deck()
    c = deck.parse_card
    board = (c("Qc"), c("Jc"), c("9h"))
    mine = (c("As"), c("Ah"))
    opp = RangeDistribution(
        hands=(
            tuple(sorted((c("As"), c("Ks")))),  # blocked by my ace
            tuple(sorted((c("Ts"), c("9s")))),  # pair of nines
        ),
        weights=(0.5, 0.5),
    )
    eqs, empty = conditional_equities(MINI, board, (mine,), opp)
    assert empty == 0
    assert eqs[0] == pytest.approx(1.0)  # aces beat nines once the Ax combo is removed


def test_showdown_score_matches_engine_sign():
    rng = random.Random(7)
    for spec in (preset("kuhn"), LEDUC, MINI):
        deck_size = len(spec.ranks) * len(spec.suits)
        for _ in range(30):
            cards = rng.sample(range(deck_size), 2 * spec.private_cards + sum(spec.board_per_round))
            p = spec.private_cards
            h0, h1 = tuple(cards[:p]), tuple(cards[p : 2 * p])
            board = tuple(cards[2 * p :])
            a = showdown_score(spec, board, h0)
            b = showdown_score(spec, board, h1)
            assert (a > b) - (a < b) == evaluate_showdown(spec, board, h0, h1)


# ── bucket aggregation ─────────────────────────────────────────────


def test_bucket_ending_leduc_board_queen():
    _, t = leduc_uniform_tables()
    r0, r1 = compute_reach_ranges(LEDUC, LOSSLESS, t, t, ((), (QH,)), ("xx",))
    ending = bucket_ending(LEDUC, (QH,), r0, r1, k=8)
    b0 = ending.hand_buckets[0]
    # equity order: jacks < kings < the board-pairing queen
    assert b0[(JS,)] == b0[(JH,)] == 0
    assert b0[(KS,)] == b0[(KH,)] == 1
    assert b0[(QS,)] == 2
    assert ending.mass.sum() == pytest.approx(1.0)
    assert ending.ev[0, 0] == pytest.approx(0.0)  # jack vs jack ties
    assert ending.ev[2, 1] == pytest.approx(1.0)
    assert ending.ev[1, 0] == pytest.approx(1.0)
    # only one queen remains, so queen-vs-queen has no disjoint pair
    assert ending.mass[2, 2] == 0.0


def test_bucket_count_compresses():
    _, t = leduc_uniform_tables()
    r0, r1 = compute_reach_ranges(LEDUC, LOSSLESS, t, t, ((), (QH,)), ("xx",))
    ending = bucket_ending(LEDUC, (QH,), r0, r1, k=2)
    assert ending.mass.shape == (2, 2)


# ── solved endings ─────────────────────────────────────────────────


def test_solve_leduc_ending_is_internally_unexploitable():
    _, t = leduc_uniform_tables()
    sol = solve_endgame(
        LEDUC, LOSSLESS, t, t, ((), (QH,)), ("xx",), pot=2, stacks=(12, 12), k=8
    )
    assert sol.best_response_gap <= 1e-6
    assert sol.duality_gap <= 1e-6
    assert -13 <= sol.value <= 13
    assert sol.pot == 2 and sol.stacks == (12, 12)


def test_solution_carries_the_table_pot_not_a_model_pot():
    _, t = leduc_uniform_tables()
    sol = solve_endgame(
        LEDUC, LOSSLESS, t, t, ((), (QH,)), ("xx",), pot=6, stacks=(10, 10), k=8
    )
    assert sol.pot == 6
    assert abs(sol.value) <= 3 + 10


def test_ending_policy_lookup_and_fallback():
    _, t = leduc_uniform_tables()
    sol = solve_endgame(
        LEDUC, LOSSLESS, t, t, ((), (QH,)), ("xx",), pot=2, stacks=(12, 12), k=8
    )
    labels, probs, fallback = sol.policy(0, history="", hand=(KS,))
    assert labels == ("x", "r4")
    assert sum(probs) == pytest.approx(1.0)
    assert not fallback
    # the board card cannot be held; policy degrades to the given menu
    labels, probs, fallback = sol.policy(
        0, history="", hand=(QH,), fallback_labels=("x", "r4")
    )
    assert fallback and probs == [0.5, 0.5]
    with pytest.raises(EndgameError):
        sol.policy(0, history="", hand=(QH,))


def test_clairvoyance_even_money():
    sol = clairvoyance_ending(bet_multiple=1.0)
    assert sol.pot_fraction_claim == pytest.approx(0.75, abs=1e-9)
    labels, probs, _ = sol.policy(0, history="", bucket="lose")
    bet = probs[labels.index("r2")]
    assert bet == pytest.approx(0.5, abs=1e-6)  # bluff half the time
    labels, probs, _ = sol.policy(0, history="", bucket="win")
    assert probs[labels.index("r2")] == pytest.approx(1.0, abs=1e-6)
    labels, probs, _ = sol.policy(1, history="r2", bucket="mid")
    assert probs[labels.index("c")] == pytest.approx(0.5, abs=1e-6)


def test_clairvoyance_big_bet():
    sol = clairvoyance_ending(bet_multiple=100.0)
    assert sol.pot_fraction_claim == pytest.approx(0.5 * (1 + 100 / 101), abs=1e-6)


def test_sequential_rps_is_worthless_to_the_mover():
    sol, gap = solve_sequential_rps()
    assert abs(sol.value) <= 1e-9
    assert gap <= 1e-6
    t0, t1 = sol.tables
    for table, key in ((t0, "p0|rps|a:"), (t1, "p1|rps|a:unseen")):
        assert table.probs(key) == pytest.approx([1 / 3] * 3, abs=1e-6)


def test_short_stack_collapses_menu():
    grid = ActionGrid(open_fractions=((0.5, np.inf),), raise_fractions=((np.inf,),))
    from headsup.endgame import BucketedEnding

    ending = BucketedEnding(
        names0=("a",),
        names1=("b",),
        mass=np.array([[1.0]]),
        ev=np.array([[0.0]]),
        hand_buckets=({}, {}),
        equity_fallbacks=(0, 0),
    )
    root = build_ending_tree(MINI, grid, pot=39_900, stacks=(50, 50), ending=ending)
    # chance -> first decision: every bet size clamps to the 50-chip stack
    first = root.children[0]
    assert first.record.labels == ("x", "r50")
    after_bet = first.children[1]
    assert after_bet.record.labels == ("f", "c")
