"""Duplicate-match harness: pairing, scoring, payouts, variance, logging."""

import json
import random

import pytest

from headsup.abstraction import ALL_IN, Abstraction, LOSSLESS, build_action_grid
from headsup.agents import (
    AgentShell,
    AllInPolicy,
    CallStationPolicy,
    PerceptionTrace,
    UniformPolicy,
)
from headsup.game import KUHN, LEDUC, MINI_NLHE, ActionDescriptor, ActionKind
from headsup.harness import (
    HarnessError,
    bb_per_100,
    compare_variance,
    compute_payouts,
    off_tree_report,
    random_deal,
    run_duplicate_match,
    write_hand_log,
)


def shell_factory(spec, abstraction, policy_cls):
    def make(rng):
        return AgentShell(spec, abstraction, policy_cls(), rng)

    return make


def test_bb_per_100_rate():
    assert bb_per_100(732_713, 80_000, 100) == pytest.approx(9.1589125)
    assert 9.155 <= bb_per_100(732_713, 80_000, 100) <= 9.165
    assert bb_per_100(100, 2, 200) == pytest.approx(25.0)
    with pytest.raises(HarnessError):
        bb_per_100(1, 0, 10)
    with pytest.raises(HarnessError):
        bb_per_100(1, 2, 0)


def test_payouts_worked_example():
    cents = compute_payouts((100, 50, 20, 0))
    assert cents == (4_529_412, 2_764_706, 1_705_882, 1_000_000)
    assert sum(cents) == 10_000_000


def test_payouts_equal_profits_split_evenly():
    assert compute_payouts((5, 5, 5, 5)) == (2_500_000,) * 4
    assert compute_payouts((0, 0, 0, 0)) == (2_500_000,) * 4
    assert compute_payouts((0, -1, -2, -3)) == (2_500_000,) * 4


def test_payouts_negative_profits_take_the_floor():
    cents = compute_payouts((50, 0, -10, -40))
    assert cents == (7_000_000, 1_000_000, 1_000_000, 1_000_000)


def test_payouts_sum_exact_on_random_vectors():
    rng = random.Random(5)
    for _ in range(200):
        xs = sorted((rng.uniform(-100, 100) for _ in range(4)), reverse=True)
        cents = compute_payouts(xs)
        assert sum(cents) == 10_000_000
        assert all(c >= 1_000_000 for c in cents)


def test_payouts_validation():
    with pytest.raises(HarnessError):
        compute_payouts((1, 2, 3))
    with pytest.raises(HarnessError):
        compute_payouts((1, 2, 3, 4))  # not sorted best-first


def test_random_deal_covers_every_round():
    deal = random_deal(MINI_NLHE, random.Random(0))
    cards = list(deal.hands[0]) + list(deal.hands[1]) + [c for b in deal.boards for c in b]
    assert len(cards) == len(set(cards)) == 7
    assert len(deal.boards) == 2 and len(deal.boards[1]) == 3


def test_duplicate_pairs_cancel_pure_chance():
    """Shove-versus-call hands are decided by the deal alone, so the
    seat-swapped average of each pair must be exactly zero."""
    result = run_duplicate_match(
        KUHN,
        shell_factory(KUHN, LOSSLESS, AllInPolicy),
        shell_factory(KUHN, LOSSLESS, CallStationPolicy),
        n_pairs=30,
        seed=2,
    )
    assert result.hands_played == 60
    assert result.forfeits == 0
    assert all(m == 0.0 for m in result.pair_means)
    comparison = result.variance()
    assert comparison.var_dup == 0.0
    assert comparison.var_ind > 0
    assert comparison.reduced_95


def test_duplicate_match_reproducible():
    make = shell_factory(LEDUC, LOSSLESS, UniformPolicy)
    first = run_duplicate_match(LEDUC, make, make, n_pairs=10, seed=4)
    again = run_duplicate_match(LEDUC, make, make, n_pairs=10, seed=4)
    other = run_duplicate_match(LEDUC, make, make, n_pairs=10, seed=5)
    assert first.plays == again.plays and first.net_a == again.net_a
    assert [p.history for p in first.plays] != [p.history for p in other.plays]
    assert first.bb_per_100_a == pytest.approx(
        first.net_a / LEDUC.big_blind / (first.hands_played / 100)
    )


class StubAgent:
    """Deliberately broken foreign agent: always raises beyond its stack."""

    def __init__(self):
        self.trace = PerceptionTrace()

    def begin_hand(self, seat, hand):
        pass

    def observe_deal(self, rnd, board):
        pass

    def observe_action(self, seat, action):
        pass

    def act(self):
        return ActionDescriptor(ActionKind.RAISE, amount=10**9)


def test_illegal_action_forfeits_the_stake():
    grid = build_action_grid([[0.5, 1.0, ALL_IN]])
    abstraction = Abstraction(grid=grid, buckets=None)
    result = run_duplicate_match(
        MINI_NLHE,
        lambda rng: StubAgent(),
        shell_factory(MINI_NLHE, abstraction, CallStationPolicy),
        n_pairs=1,
        seed=0,
    )
    assert result.forfeits == 2
    # seating one: the stub posts the 50-chip small blind and forfeits it;
    # seating two: the stub forfeits its 100-chip big blind after a limp
    assert [p.net_a for p in result.plays] == [-50, -100]
    assert [p.forfeit_seat for p in result.plays] == [0, 1]
    assert result.pair_means == [-75.0]
    assert result.net_a == -150


def test_hand_log_jsonl(tmp_path):
    make = shell_factory(LEDUC, LOSSLESS, UniformPolicy)
    result = run_duplicate_match(LEDUC, make, make, n_pairs=3, seed=1)
    path = tmp_path / "match.jsonl"
    write_hand_log(path, result)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(lines) == 1 + result.hands_played
    header = lines[0]
    assert header["kind"] == "match_header"
    assert header["schema_version"] == 1
    assert header["spec"] == "leduc"
    for row in lines[1:]:
        assert row["kind"] == "play"
        assert row["pair"] in range(3) and row["play"] in (0, 1)
        assert isinstance(row["history"], list)
        assert "net_a" in row and "forfeit_seat" in row


def test_off_tree_report_shape():
    grid = build_action_grid([[0.25, 0.5, 1.0, ALL_IN]], [[0.5, 1.0, ALL_IN]])
    abstraction = Abstraction(grid=grid, buckets=None)
    shell = AgentShell(MINI_NLHE, abstraction, CallStationPolicy(), random.Random(3))
    shell.begin_hand(1, (22, 23))
    shell.observe_deal(0, ())
    shell.observe_action(0, ActionDescriptor(ActionKind.RAISE, amount=220))
    shell.act()
    report = off_tree_report(shell.trace)
    assert report["schema_version"] == 1
    assert report["off_menu_count"] == 1
    assert report["max_pot_divergence"] > 0
    assert report["translation_events"][0]["x"] == pytest.approx(0.8)
    assert report["ending"] is None


def test_compare_variance_needs_two_pairs():
    with pytest.raises(HarnessError):
        compare_variance([1.0], [1.0, 2.0])
