"""Agent shell: perception, translation, realization, and endgame anchoring.

Each scenario drives an AgentShell from a scripted table while the test
maintains its own engine mirror of the true state; the shell's true view
must track the mirror chip for chip.
"""

import random

import pytest

from headsup.abstraction import ALL_IN, Abstraction, LOSSLESS, build_action_grid
from headsup.agents import (
    AgentError,
    AgentShell,
    AllInPolicy,
    CallStationPolicy,
    EndingConfig,
    TablePolicy,
    UniformPolicy,
    sample_label,
)
from headsup.game import (
    LEDUC,
    MINI_NLHE,
    ActionDescriptor,
    ActionKind,
    DealOutcome,
    apply_action,
    apply_chance,
    deal_hand,
)
from headsup.model import model_infoset_key
from headsup.strategy import StrategyTable

# mini deck ids: rank index * 4 + suit index over ranks 9TJQKA, suits cdhs
TC, TD = 4, 5
JC, QC, KC = 8, 12, 16
AC, AD, AH, AS = 20, 21, 22, 23

# leduc deck ids over ranks JQK, suits sh
JS_L, QS_L, KS_L = 0, 2, 4

RAISE = ActionKind.RAISE
CALL = ActionDescriptor(ActionKind.CALL)
CHECK = ActionDescriptor(ActionKind.CHECK)


def raise_to(amount: int) -> ActionDescriptor:
    return ActionDescriptor(RAISE, amount=amount)


def wide_grid():
    return build_action_grid([[0.25, 0.5, 1.0, ALL_IN]], [[0.5, 1.0, ALL_IN]])


def pot_only_grid():
    return build_action_grid([[1.0, ALL_IN]])


def test_leduc_lockstep_no_translation():
    """Fixed-bet play keeps the perceived view identical to the table."""
    shell = AgentShell(LEDUC, LOSSLESS, AllInPolicy(), random.Random(0))
    shell.begin_hand(0, (KS_L,))
    mirror = deal_hand(LEDUC, DealOutcome(hands=((KS_L,), (JS_L,)), board=()))
    shell.observe_deal(0, ())

    realized = shell.act()
    assert realized == raise_to(2)
    mirror = apply_action(mirror, realized)
    shell.observe_action(1, CALL)
    mirror = apply_action(mirror, CALL)

    assert mirror.phase == "chance"
    shell.observe_deal(1, (QS_L,))
    mirror = apply_chance(mirror, DealOutcome(hands=None, board=(QS_L,)))

    realized = shell.act()
    assert realized == raise_to(4)
    mirror = apply_action(mirror, realized)
    shell.observe_action(1, raise_to(8))
    mirror = apply_action(mirror, raise_to(8))
    realized = shell.act()
    assert realized == CALL
    mirror = apply_action(mirror, realized)

    assert mirror.phase == "showdown" and mirror.pot == 22
    assert shell.true_state.pot == 22
    assert shell.true_state.history == mirror.history == ("r2c", "r4r8c")
    assert shell.perceived.history == mirror.history
    assert shell.trace.translation_events == []
    assert shell.trace.max_pot_divergence == 0
    assert [d.pot_divergence for d in shell.trace.decisions] == [0, 0, 0]
    assert [d.realized_token for d in shell.trace.decisions] == ["r2", "r4", "c"]


def test_mini_on_menu_sizes_stay_exact():
    """Bets that land exactly on a menu rung leave no perception drift."""
    abstraction = Abstraction(grid=wide_grid(), buckets=None)
    shell = AgentShell(MINI_NLHE, abstraction, CallStationPolicy(), random.Random(1))
    shell.begin_hand(0, (AH, AS))
    mirror = deal_hand(MINI_NLHE, DealOutcome(hands=((AH, AS), (KC, 17)), board=()))
    shell.observe_deal(0, ())

    realized = shell.act()  # limp the small blind
    assert realized == CALL
    mirror = apply_action(mirror, realized)
    # pot-size raise: 200 into 200 sits exactly on the 1.0 rung
    shell.observe_action(1, raise_to(300))
    mirror = apply_action(mirror, raise_to(300))
    realized = shell.act()
    assert realized == CALL
    mirror = apply_action(mirror, realized)

    flop = (TC, JC, QC)
    shell.observe_deal(1, flop)
    mirror = apply_chance(mirror, DealOutcome(hands=None, board=flop))
    shell.observe_action(1, CHECK)
    mirror = apply_action(mirror, CHECK)
    realized = shell.act()
    assert realized == CHECK
    mirror = apply_action(mirror, realized)

    assert mirror.phase == "showdown" and mirror.pot == 600
    assert shell.true_state.pot == shell.perceived.pot == 600
    assert shell.true_state.history == mirror.history
    events = shell.trace.translation_events
    assert len(events) == 1
    assert events[0].exact_hit and events[0].x == pytest.approx(1.0)
    assert events[0].chosen == pytest.approx(1.0)
    assert shell.trace.max_pot_divergence == 0


@pytest.mark.parametrize("seed", [3, 11, 29])
def test_off_menu_bet_randomizes_and_diverges(seed):
    """A 100-chip bet into 500 sits between the 0 and 0.25 rungs.

    The mapping must down-weight with probability exactly 1/6 and the
    perceived pot must drift from the table either way.
    """
    abstraction = Abstraction(grid=wide_grid(), buckets=None)
    shell = AgentShell(MINI_NLHE, abstraction, CallStationPolicy(), random.Random(seed))
    shell.begin_hand(1, (AH, AS))
    mirror = deal_hand(MINI_NLHE, DealOutcome(hands=((TC, TD), (AH, AS)), board=()))
    shell.observe_deal(0, ())

    shell.observe_action(0, raise_to(250))  # 150 into 150: exact 1.0 rung
    mirror = apply_action(mirror, raise_to(250))
    realized = shell.act()
    assert realized == CALL
    mirror = apply_action(mirror, realized)
    assert mirror.pot == 500

    flop = (JC, QC, KC)
    shell.observe_deal(1, flop)
    mirror = apply_chance(mirror, DealOutcome(hands=None, board=flop))
    realized = shell.act()  # first to speak as the big blind
    assert realized == CHECK
    mirror = apply_action(mirror, realized)

    shell.observe_action(0, raise_to(100))  # 100 into 500: between rungs
    mirror = apply_action(mirror, raise_to(100))
    realized = shell.act()
    assert realized == CALL
    mirror = apply_action(mirror, realized)
    assert mirror.is_terminal() and mirror.pot == 700
    assert shell.true_state.pot == 700

    events = shell.trace.translation_events
    assert len(events) == 2
    assert events[0].exact_hit
    off = events[1]
    assert off.round == 1 and off.pot == 500 and off.observed_chips == 100
    assert off.x == pytest.approx(0.2)
    assert off.lower == 0.0 and off.upper == 0.25
    assert off.down_probability == pytest.approx(1 / 6, abs=1e-12)
    assert not off.exact_hit and not off.clamped

    # the shell consumed exactly one draw from its stream for this event
    probe = random.Random(seed).random()
    assert off.draw == probe
    went_down = probe < off.down_probability
    last = shell.trace.decisions[-1]
    assert last.round == 1 and last.realized_token == "c"
    if went_down:
        # perceived as a check: perception ended the hand, table had not
        assert off.chosen == 0.0
        assert last.fallback and last.chosen_label == "(catch-up)"
        assert last.perceived_pot == 500 and last.true_pot == 600
        assert shell.trace.max_pot_divergence == 200
    else:
        assert off.chosen == 0.25
        assert not last.fallback and last.chosen_label == "c"
        assert last.perceived_pot == 625 and last.true_pot == 600
        assert shell.trace.max_pot_divergence == 50
    assert shell.trace.max_pot_divergence > 0


def test_menu_items_remember_grid_fractions():
    abstraction = Abstraction(grid=wide_grid(), buckets=None)
    shell = AgentShell(MINI_NLHE, abstraction, CallStationPolicy(), random.Random(0))
    shell.begin_hand(0, (AH, AS))
    shell.observe_deal(0, ())
    menu = {m.label: m for m in shell._menu(shell.perceived)}
    assert menu["c"].fraction is None
    assert menu["r200"].fraction == 0.5  # 75 chips clamps up to the 100 minimum
    assert menu["r250"].fraction == 1.0
    assert menu["r20000"].fraction == ALL_IN


def test_all_in_policy_realizes_legal_shove():
    abstraction = Abstraction(grid=wide_grid(), buckets=None)
    shell = AgentShell(MINI_NLHE, abstraction, AllInPolicy(), random.Random(0))
    shell.begin_hand(0, (AH, AS))
    mirror = deal_hand(MINI_NLHE, DealOutcome(hands=((AH, AS), (TC, TD)), board=()))
    shell.observe_deal(0, ())
    realized = shell.act()
    assert realized == raise_to(20_000)
    apply_action(mirror, realized)  # raises IllegalActionError if out of bounds


def test_uniform_policy_stays_on_menu():
    abstraction = Abstraction(grid=wide_grid(), buckets=None)
    shell = AgentShell(MINI_NLHE, abstraction, UniformPolicy(), random.Random(9))
    shell.begin_hand(0, (AH, AS))
    mirror = deal_hand(MINI_NLHE, DealOutcome(hands=((AH, AS), (TC, TD)), board=()))
    shell.observe_deal(0, ())
    realized = shell.act()
    apply_action(mirror, realized)
    assert shell.trace.decisions[0].chosen_label in ("f", "c", "r200", "r250", "r20000")


def test_table_policy_plays_stored_mix_then_falls_back():
    table = StrategyTable()
    policy = TablePolicy((table, table))
    shell = AgentShell(LEDUC, LOSSLESS, policy, random.Random(0))
    shell.begin_hand(0, (KS_L,))
    shell.observe_deal(0, ())
    key = model_infoset_key(shell.perceived, 0, LOSSLESS)
    table.set(key, ("x", "r2"), [0.0, 1.0])

    realized = shell.act()
    assert realized == raise_to(2)
    assert policy.uniform_fallbacks == 0
    shell.observe_action(1, CALL)
    shell.observe_deal(1, (QS_L,))
    shell.act()  # round-1 key is absent: uniform fallback
    assert policy.uniform_fallbacks == 1


class CallThenEnding:
    """Calls until the last round, then plays the solved ending mix."""

    def choose(self, view):
        if view.final_round:
            row = view.solve_ending()
            if row is not None:
                labels, probs, _ = row
                return sample_label(labels, probs, view.rng)
        return CallStationPolicy().choose(view)


def test_endgame_anchor_carries_true_pot():
    """Perception drifts before the last round; the ending must not.

    The opponent's 220-chip open (0.8 pot) is off the menu, so the agent's
    perceived pot is wrong entering the flop.  The anchored ending has to be
    built at the table's actual 440-chip pot and actual stacks.
    """
    abstraction = Abstraction(grid=pot_only_grid(), buckets=None)
    empty = StrategyTable()
    shell = AgentShell(
        MINI_NLHE,
        abstraction,
        CallThenEnding(),
        random.Random(7),
        ending=EndingConfig(range_tables=(empty, empty), buckets=3),
    )
    shell.begin_hand(1, (AH, AS))
    mirror = deal_hand(MINI_NLHE, DealOutcome(hands=((TC, TD), (AH, AS)), board=()))
    shell.observe_deal(0, ())

    shell.observe_action(0, raise_to(220))  # 120 into 150: between rungs
    mirror = apply_action(mirror, raise_to(220))
    realized = shell.act()
    assert realized == CALL
    mirror = apply_action(mirror, realized)
    assert mirror.pot == 440
    assert shell.trace.max_pot_divergence > 0  # perception already drifted

    flop = (JC, QC, KC)
    shell.observe_deal(1, flop)
    mirror = apply_chance(mirror, DealOutcome(hands=None, board=flop))
    assert "anchored ending at pot 440" in shell.trace.notes

    while not mirror.is_terminal():
        if mirror.to_act == 1:
            realized = shell.act()
            mirror = apply_action(mirror, realized)
        else:
            action = CALL if mirror.to_call() > 0 else CHECK
            shell.observe_action(0, action)
            mirror = apply_action(mirror, action)

    ending = shell.trace.ending
    assert ending is not None
    assert ending["pot"] == 440
    assert ending["stacks"] == (19_780, 19_780)
    assert ending["duality_gap"] <= 1e-6
    assert ending["best_response_gap"] <= 1e-6
    final_decisions = [d for d in shell.trace.decisions if d.round == 1]
    assert final_decisions and all(d.used_ending for d in final_decisions)
    assert not any("fell back to uniform" in note for note in shell.trace.notes)
    assert shell.true_state.pot == mirror.pot


def test_protocol_errors():
    abstraction = Abstraction(grid=wide_grid(), buckets=None)
    shell = AgentShell(MINI_NLHE, abstraction, CallStationPolicy(), random.Random(0))
    with pytest.raises(AgentError):
        shell.act()
    with pytest.raises(AgentError):
        shell.begin_hand(2, (AH, AS))
    shell.begin_hand(1, (AH, AS))
    with pytest.raises(AgentError):
        shell.observe_deal(1, ())  # wrong round
    shell.observe_deal(0, ())
    with pytest.raises(AgentError):
        shell.act()  # small blind speaks first, not the agent
    with pytest.raises(AgentError):
        shell.observe_action(1, CALL)  # own seat
