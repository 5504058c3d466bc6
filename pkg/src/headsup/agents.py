"""Playing agents: perception, size translation, and pluggable policies.

An agent keeps two views of the hand it is playing.  The true view tracks
exactly what happened at the table.  The perceived view lives inside the
agent's discretized action menu: every observed raise is mapped onto a menu
size (randomized between the neighbouring rungs for off-menu sizes), so the
policy always looks up positions its model actually contains.  The two
views can drift apart in pot size; that drift is recorded per decision.

When the last betting round begins, an agent configured for re-solving
anchors a fresh view at the real pot and stacks, solves that ending
exactly, and plays the solved mix for the rest of the hand.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable

from .abstraction import Abstraction, concrete_bet_sizes
from .endgame import EndgameError, EndgameSolution, ending_start_state, solve_endgame
from .game import (
    ActionDescriptor,
    ActionKind,
    DealOutcome,
    GameSpec,
    HandState,
    IllegalActionError,
    action_from_token,
    apply_action,
    apply_chance,
    first_actor,
    new_hand,
)
from .model import model_infoset_key
from .strategy import StrategyTable
from .translation import TranslationEvent, translate_bet


class AgentError(RuntimeError):
    """Raised when an agent is driven out of protocol order."""


# ── decision plumbing ──────────────────────────────────────────────


@dataclass(frozen=True)
class MenuItem:
    """One abstract action: its token, engine descriptor, and, for raises
    produced by the grid, the pot fraction that generated it."""

    label: str
    action: ActionDescriptor
    fraction: float | None = None


@dataclass
class DecisionView:
    """Everything a policy may consult when choosing an action."""

    seat: int
    labels: tuple[str, ...]
    menu: tuple[MenuItem, ...]
    perceived: HandState
    trunk_key: str | None
    final_round: bool
    rng: random.Random
    solve_ending: Callable[[], tuple[tuple[str, ...], list[float], bool] | None]


@dataclass
class DecisionRecord:
    round: int
    true_pot: int
    perceived_pot: int
    chosen_label: str
    realized_token: str
    used_ending: bool = False
    fallback: bool = False

    @property
    def pot_divergence(self) -> int:
        return self.true_pot - self.perceived_pot


@dataclass
class PerceptionTrace:
    """Diagnostics for one played hand."""

    translation_events: list[TranslationEvent] = field(default_factory=list)
    decisions: list[DecisionRecord] = field(default_factory=list)
    divergences: list[tuple[int, int, int]] = field(default_factory=list)  # (round, true, perceived)
    ending: dict | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def max_pot_divergence(self) -> int:
        worst = 0
        for _, true_pot, perceived_pot in self.divergences:
            worst = max(worst, abs(true_pot - perceived_pot))
        return worst


# ── policies ───────────────────────────────────────────────────────


class UniformPolicy:
    """Every available action with equal probability."""

    def choose(self, view: DecisionView) -> str:
        return view.labels[view.rng.randrange(len(view.labels))]


class CallStationPolicy:
    """Always checks or calls; never folds, never raises.  Deterministic."""

    def choose(self, view: DecisionView) -> str:
        for want in ("c", "x"):
            if want in view.labels:
                return want
        return view.labels[0]


class AllInPolicy:
    """Shoves whenever raising is possible, otherwise checks or calls."""

    def choose(self, view: DecisionView) -> str:
        raises = [m for m in view.menu if m.action.kind is ActionKind.RAISE]
        if raises:
            biggest = max(raises, key=lambda m: m.action.amount or 0)
            return biggest.label
        return CallStationPolicy().choose(view)


def sample_label(labels: tuple[str, ...], probs: list[float], rng: random.Random) -> str:
    draw = rng.random()
    acc = 0.0
    for label, p in zip(labels, probs):
        acc += p
        if draw < acc:
            return label
    return labels[-1]


class TablePolicy:
    """Plays a solved strategy table; optionally re-solves the last round.

    ``tables`` hold the action mixes to play, one per seat.  Missing
    infosets degrade to uniform (and are noted).  With ``use_ending`` the
    policy asks the agent shell for a solved ending at the final round and
    plays that instead; the shell's ending configuration controls how the
    ending is built.
    """

    def __init__(
        self,
        tables: tuple[StrategyTable, StrategyTable],
        use_ending: bool = False,
    ):
        self.tables = tables
        self.use_ending = use_ending
        self.uniform_fallbacks = 0

    def choose(self, view: DecisionView) -> str:
        if self.use_ending and view.final_round:
            row = view.solve_ending()
            if row is not None:
                labels, probs, _ = row
                return sample_label(labels, probs, view.rng)
        table = self.tables[view.seat]
        if view.trunk_key is not None and view.trunk_key in table:
            return sample_label(
                tuple(table.labels(view.trunk_key)),
                table.probs(view.trunk_key),
                view.rng,
            )
        self.uniform_fallbacks += 1
        return view.labels[view.rng.randrange(len(view.labels))]


@dataclass
class EndingConfig:
    """How a shell builds final-round endings.

    ``range_tables`` must be the un-postprocessed averaged strategies; the
    hand distributions come from them even when play uses sharpened tables.
    """

    range_tables: tuple[StrategyTable, StrategyTable]
    buckets: int = 8
    enabled: bool = True


# ── the agent shell ────────────────────────────────────────────────


class AgentShell:
    """Perception, translation, and action realization around a policy."""

    def __init__(
        self,
        spec: GameSpec,
        abstraction: Abstraction,
        policy,
        rng: random.Random,
        ending: EndingConfig | None = None,
        name: str = "agent",
    ):
        self.spec = spec
        self.abstraction = abstraction
        self.policy = policy
        self.rng = rng
        self.ending_config = ending
        self.name = name
        self.seat = -1
        self.hand: tuple[int, ...] = ()
        self.true_state: HandState | None = None
        self.perceived: HandState | None = None
        self.shadow: HandState | None = None  # true-scale final-round view
        self.boards: list[tuple[int, ...]] = []
        self.trace = PerceptionTrace()
        self._solution: EndgameSolution | None = None
        self._ending_failed = False

    # -- hand lifecycle --

    def begin_hand(self, seat: int, hand: tuple[int, ...]) -> None:
        if seat not in (0, 1):
            raise AgentError("seat must be 0 or 1")
        self.seat = seat
        self.hand = tuple(sorted(hand))
        self.true_state = new_hand(self.spec)
        self.perceived = new_hand(self.spec)
        self.shadow = None
        self.boards = []
        self.trace = PerceptionTrace()
        self._solution = None
        self._ending_failed = False

    def observe_deal(self, rnd: int, board: tuple[int, ...]) -> None:
        true, perceived = self._require_states()
        if true.phase != "chance" or true.round != rnd:
            raise AgentError(f"not awaiting a round-{rnd} deal")
        self.boards.append(tuple(board))
        if rnd == 0:
            self.true_state = self._deal_first(true, board)
            self.perceived = self._deal_first(perceived, board)
            self._maybe_anchor()
            return
        self.true_state = apply_chance(
            self._clear_collisions(true, board), DealOutcome(hands=None, board=board)
        )
        self._settle_model_round()
        perceived = self.perceived
        try:
            self.perceived = apply_chance(
                self._clear_collisions(perceived, board), DealOutcome(hands=None, board=board)
            )
        except IllegalActionError:
            self.trace.notes.append(f"model could not take the round-{rnd} deal")
        self._maybe_anchor()

    def observe_action(self, seat: int, action: ActionDescriptor) -> None:
        """Record the opponent's concrete table action."""
        true, _ = self._require_states()
        if seat == self.seat:
            raise AgentError("own actions are recorded by act()")
        if true.phase != "act" or true.to_act != seat:
            raise AgentError("opponent is not to act")
        self._maybe_anchor()
        token = self._perceive(action)
        self.true_state = apply_action(true, action)
        self._advance_model(token)
        self._record_divergence()

    def act(self) -> ActionDescriptor:
        """Choose and return the concrete action for the true table."""
        true, _ = self._require_states()
        if true.phase != "act" or true.to_act != self.seat:
            raise AgentError("agent is not to act")
        self._maybe_anchor()
        model = self._model_state()
        used_ending = False
        fallback = False
        if model.phase == "act" and model.to_act == self.seat:
            menu = self._menu(model)
            labels = tuple(m.label for m in menu)
            trunk_key = (
                None
                if self.shadow is not None
                else model_infoset_key(model, self.seat, self.abstraction)
            )
            view = DecisionView(
                seat=self.seat,
                labels=labels,
                menu=menu,
                perceived=model,
                trunk_key=trunk_key,
                final_round=true.round == self.spec.num_rounds - 1,
                rng=self.rng,
                solve_ending=self._ending_row_for_act,
            )
            label = self.policy.choose(view)
            if label not in labels:
                raise AgentError(f"policy chose {label!r}, not on the menu {labels}")
            item = next(m for m in menu if m.label == label)
            used_ending = self.shadow is not None
        else:
            # Perception believes the betting is settled; settle it for real.
            label = "(catch-up)"
            item = None
            fallback = True
        realized = self._realize(item)
        token = realized.token()
        self.true_state = apply_action(true, realized)
        if item is not None:
            self._advance_model(item.label)
        self.trace.decisions.append(
            DecisionRecord(
                round=true.round,
                true_pot=true.pot,
                perceived_pot=model.pot,
                chosen_label=label,
                realized_token=token,
                used_ending=used_ending,
                fallback=fallback,
            )
        )
        self._record_divergence()
        return realized

    # -- internals --

    def _require_states(self) -> tuple[HandState, HandState]:
        if self.true_state is None or self.perceived is None:
            raise AgentError("begin_hand was not called")
        return self.true_state, self.perceived

    def _model_state(self) -> HandState:
        return self.shadow if self.shadow is not None else self.perceived

    def _deal_first(self, state: HandState, board: tuple[int, ...]) -> HandState:
        used = set(self.hand) | set(board)
        deck_size = len(self.spec.ranks) * len(self.spec.suits)
        free = [c for c in range(deck_size) if c not in used]
        placeholder = tuple(free[: self.spec.private_cards])
        hands = (self.hand, placeholder) if self.seat == 0 else (placeholder, self.hand)
        return apply_chance(state, DealOutcome(hands=hands, board=board))

    def _clear_collisions(self, state: HandState, incoming: tuple[int, ...]) -> HandState:
        """Move the opponent's stand-in cards out of the way of a deal."""
        opp = 1 - self.seat
        taken = set(state.hands[self.seat]) | set(state.board) | set(incoming)
        if not (set(state.hands[opp]) & taken):
            return state
        deck_size = len(self.spec.ranks) * len(self.spec.suits)
        free = [c for c in range(deck_size) if c not in taken]
        fresh = tuple(free[: self.spec.private_cards])
        hands = list(state.hands)
        hands[opp] = fresh
        return replace(state, hands=(hands[0], hands[1]))

    def _menu(self, state: HandState) -> tuple[MenuItem, ...]:
        """Abstract menu at a model state, remembering raise fractions."""
        from .model import abstract_actions

        items: list[MenuItem] = []
        seen: dict[str, int] = {}
        for label, action in abstract_actions(state, self.abstraction):
            items.append(MenuItem(label=label, action=action))
            seen[label] = len(items) - 1
        grid = self.abstraction.grid
        if grid is not None and self.spec.bet_structure == "no_limit":
            bounds = self._raise_window(state)
            if bounds is not None:
                min_wager, max_wager = bounds
                level = max(state.committed)
                for fraction in grid.for_situation(state.round, state.to_call() > 0):
                    sizes = concrete_bet_sizes((fraction,), state.pot, min_wager, max_wager)
                    if not sizes:
                        continue
                    label = f"r{level + sizes[0]}"
                    idx = seen.get(label)
                    if idx is not None and items[idx].fraction is None:
                        items[idx] = replace(items[idx], fraction=fraction)
        return tuple(items)

    @staticmethod
    def _raise_window(state: HandState) -> tuple[int, int] | None:
        from .game import legal_actions

        for act in legal_actions(state):
            if act.kind is ActionKind.RAISE and act.amount is None:
                level = max(state.committed)
                assert act.min_to is not None and act.max_to is not None
                return act.min_to - level, act.max_to - level
        return None

    def _realize(self, item: MenuItem | None) -> ActionDescriptor:
        """Concrete action on the true table for a chosen menu entry."""
        true = self.true_state
        assert true is not None
        owe = true.to_call()
        if item is None:  # catch-up: settle the unperceived bet
            return self._call_or_check(owe)
        kind = item.action.kind
        if kind is ActionKind.FOLD:
            return (
                ActionDescriptor(ActionKind.FOLD)
                if owe > 0
                else ActionDescriptor(ActionKind.CHECK)
            )
        if kind in (ActionKind.CHECK, ActionKind.CALL):
            return self._call_or_check(owe)
        if self.spec.bet_structure == "fixed":
            # fixed games cannot drift: the menu amount is the table amount
            return ActionDescriptor(ActionKind.RAISE, amount=item.action.amount)
        window = self._raise_window(true)
        if window is None:
            return self._call_or_check(owe)
        min_wager, max_wager = window
        level = max(true.committed)
        if item.fraction is not None:
            sizes = concrete_bet_sizes((item.fraction,), true.pot, min_wager, max_wager)
            wager = sizes[0] if sizes else max_wager
        else:
            assert item.action.amount is not None
            model_level = max(self._model_state().committed)
            wager = min(max(item.action.amount - model_level, min_wager), max_wager)
        return ActionDescriptor(ActionKind.RAISE, amount=level + wager)

    @staticmethod
    def _call_or_check(owe: int) -> ActionDescriptor:
        return (
            ActionDescriptor(ActionKind.CALL) if owe > 0 else ActionDescriptor(ActionKind.CHECK)
        )

    def _perceive(self, action: ActionDescriptor) -> str | None:
        """Map the opponent's concrete action into the model's menu."""
        model = self._model_state()
        opp = 1 - self.seat
        if model.phase != "act" or model.to_act != opp:
            return None  # model believes nothing is pending
        owe_model = model.to_call(opp)
        if action.kind is ActionKind.FOLD:
            return "f" if owe_model > 0 else None
        if action.kind in (ActionKind.CHECK, ActionKind.CALL):
            return "c" if owe_model > 0 else "x"
        return self._perceive_raise(action, model)

    def _perceive_raise(self, action: ActionDescriptor, model: HandState) -> str | None:
        true = self.true_state
        assert true is not None and action.amount is not None
        owe_model = model.to_call(1 - self.seat)
        if self.spec.bet_structure == "fixed" or self.abstraction.grid is None:
            # fixed sizes: the observed token is already on the menu
            window = self._raise_window_fixed(model)
            if window is None:
                return "c" if owe_model > 0 else "x"
            return f"r{window}"
        true_level = max(true.committed)
        wager = action.amount - true_level
        window = self._raise_window(true)
        max_wager = window[1] if window is not None else wager
        event = translate_bet(
            observed_chips=wager,
            pot=true.pot,
            rnd=true.round,
            grid=self.abstraction.grid,
            all_in_chips=max_wager,
            rng=self.rng,
            facing_bet=true.to_call() > 0,
        )
        self.trace.translation_events.append(event)
        chosen = event.chosen
        if chosen == 0.0:
            return "c" if owe_model > 0 else "x"
        model_window = self._raise_window(model)
        if model_window is None:
            return "c" if owe_model > 0 else "x"
        min_wager, cap = model_window
        all_in_fraction = max_wager / true.pot
        if event.clamped or chosen >= all_in_fraction - 1e-12:
            model_wager = cap
        else:
            sizes = concrete_bet_sizes((chosen,), model.pot, min_wager, cap)
            model_wager = sizes[0] if sizes else cap
        return f"r{max(model.committed) + model_wager}"

    @staticmethod
    def _raise_window_fixed(state: HandState) -> int | None:
        from .game import legal_actions

        for act in legal_actions(state):
            if act.kind is ActionKind.RAISE and act.amount is not None:
                return act.amount
        return None

    def _settle_model_round(self) -> None:
        """Force the model to finish a betting round the table already closed."""
        model = self._model_state()
        while model.phase == "act":
            token = "c" if model.to_call() > 0 else "x"
            self.trace.notes.append(f"model round settled with {token!r}")
            model = apply_action(model, action_from_token(token))
            if self.shadow is not None:
                self.shadow = model
            else:
                self.perceived = model

    def _advance_model(self, token: str | None) -> None:
        """Apply a perceived token to whichever model view is active."""
        if token is None:
            return
        model = self._model_state()
        if model.phase != "act":
            self.trace.notes.append(f"model ignored token {token!r}")
            return
        try:
            nxt = apply_action(model, action_from_token(token))
        except IllegalActionError:
            self.trace.notes.append(f"model could not apply {token!r}")
            return
        if self.shadow is not None:
            self.shadow = nxt
        else:
            self.perceived = nxt

    def _record_divergence(self) -> None:
        true = self.true_state
        model = self._model_state()
        assert true is not None
        self.trace.divergences.append((true.round, true.pot, model.pot))

    # -- final-round re-solving --

    def _maybe_anchor(self) -> None:
        """Re-anchor perception at the true pot when the last round begins."""
        true = self.true_state
        if (
            true is None
            or self.shadow is not None
            or self.ending_config is None
            or not self.ending_config.enabled
            or self.spec.num_rounds < 2
            or true.round != self.spec.num_rounds - 1
            or true.phase != "act"
        ):
            return
        if true.history[-1] != "":
            return  # the round is already under way; too late to anchor
        self.shadow = ending_start_state(
            self.spec,
            true.pot,
            true.stacks,
            first_actor(self.spec, true.round),
        )
        self.trace.notes.append(f"anchored ending at pot {true.pot}")

    def _solve_ending(self) -> EndgameSolution | None:
        if self._solution is not None or self._ending_failed:
            return self._solution
        cfg = self.ending_config
        true = self.true_state
        perceived = self.perceived
        if cfg is None or not cfg.enabled or true is None or perceived is None:
            return None
        if self.shadow is None:
            return None
        final = self.spec.num_rounds - 1
        boards = tuple(self.boards)
        try:
            self._solution = solve_endgame(
                self.spec,
                self.abstraction,
                cfg.range_tables[0],
                cfg.range_tables[1],
                boards,
                tuple(perceived.history[:final]),
                pot=self.shadow.paid[0] + self.shadow.paid[1],
                stacks=(
                    self.shadow.stacks[0] + self.shadow.committed[0],
                    self.shadow.stacks[1] + self.shadow.committed[1],
                ),
                k=cfg.buckets,
            )
        except (EndgameError, KeyError) as exc:
            self._ending_failed = True
            self.trace.notes.append(f"ending solve failed: {exc}")
            return None
        sol = self._solution
        self.trace.ending = {
            "pot": sol.pot,
            "stacks": sol.stacks,
            "value": sol.value,
            "duality_gap": sol.duality_gap,
            "best_response_gap": sol.best_response_gap,
        }
        return sol

    def _ending_row_for_act(self) -> tuple[tuple[str, ...], list[float], bool] | None:
        sol = self._solve_ending()
        if sol is None or self.shadow is None:
            return None
        menu = self._menu(self.shadow)
        labels = tuple(m.label for m in menu)
        row = sol.policy(
            self.seat,
            history=self.shadow.history[-1],
            hand=self.hand,
            fallback_labels=labels,
        )
        if row[2]:
            self.trace.notes.append("ending policy fell back to uniform")
        return row
