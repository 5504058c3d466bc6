"""Command line front end: train, match, inspect, re-solve, serve."""

from __future__ import annotations

import functools
import json
import random
from pathlib import Path

import click

from .agents import (
    AgentShell,
    AllInPolicy,
    CallStationPolicy,
    EndingConfig,
    TablePolicy,
    UniformPolicy,
)
from .cfr import run_cfr
from .config import RunConfig, load_config
from .endgame import solve_endgame
from .evaluate import exploitability
from .harness import bb_per_100, compute_payouts, run_duplicate_match, write_hand_log
from .model import build_tree
from .postprocess import apply_schedule, matrix_purification_experiment
from .strategy import StrategyTable, load_strategy, save_strategy

BUILTIN_POLICIES = ("uniform", "call_station", "all_in")


def _friendly(fn):
    """Turn library errors into clean command line failures."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ValueError, RuntimeError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def config_option(fn):
    return click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="TOML run configuration (environment variables still override).",
    )(fn)


@click.group()
def main():
    """Heads-up poker toolkit: abstraction, solving, matches, endings."""


# ── solve ──────────────────────────────────────────────────────────


@main.command()
@config_option
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Strategy file to write.")
@click.option("--report-exploitability", is_flag=True, help="Print exploitability at every checkpoint.")
@_friendly
def solve(config_path, out, report_exploitability):
    """Train a strategy for the configured game."""
    cfg = load_config(config_path)
    tree = build_tree(cfg.spec, cfg.abstraction)
    click.echo(
        f"game={cfg.spec.name} infosets={len(tree.infosets)} "
        f"algorithm={cfg.solve.algorithm} iterations={cfg.solve.iterations}"
    )
    run = run_cfr(
        tree=tree,
        iterations=cfg.solve.iterations,
        variant=cfg.solve.algorithm,
        seed=cfg.solve.seed if cfg.solve.algorithm == "chance_sampled" else None,
    )
    if report_exploitability:
        for t, table in sorted(run.checkpoints.items()):
            gap = exploitability(tree.root, table)
            click.echo(f"checkpoint {t:>10}: exploitability {gap:.6f}")
    final_gap = exploitability(tree.root, run.strategy)
    click.echo(f"final exploitability: {final_gap:.6f}")
    table = run.strategy
    schedule = cfg.postprocess.schedule()
    if schedule is not None:
        table = apply_schedule(table, schedule)
        click.echo(f"postprocess: {schedule.mode} applied")
    if out is not None:
        save_strategy(table, out)
        click.echo(f"strategy written to {out}")


# ── matches ────────────────────────────────────────────────────────


def _agent_factory(token: str, cfg: RunConfig):
    """Agent maker from a policy name or a strategy file path."""
    if token == "uniform":
        build = lambda: UniformPolicy()
    elif token == "call_station":
        build = lambda: CallStationPolicy()
    elif token == "all_in":
        build = lambda: AllInPolicy()
    else:
        table = load_strategy(token)
        ending = None
        if cfg.agent.use_ending:
            ending = EndingConfig(
                range_tables=(table, table), buckets=cfg.agent.ending_buckets
            )

        def make_table_agent(rng: random.Random) -> AgentShell:
            policy = TablePolicy((table, table), use_ending=cfg.agent.use_ending)
            return AgentShell(cfg.spec, cfg.abstraction, policy, rng, ending=ending)

        return make_table_agent

    def make_agent(rng: random.Random) -> AgentShell:
        return AgentShell(cfg.spec, cfg.abstraction, build(), rng)

    return make_agent


@main.command()
@config_option
@click.option("--a", "agent_a", default="uniform", help="First contestant: policy name or strategy file.")
@click.option("--b", "agent_b", default="uniform", help="Second contestant: policy name or strategy file.")
@click.option("--pairs", type=int, default=None, help="Duplicate pairs to play (two hands each).")
@click.option("--seed", type=int, default=None)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None, help="JSONL hand history file.")
@_friendly
def match(config_path, agent_a, agent_b, pairs, seed, log_path):
    """Run a duplicate match between two agents."""
    cfg = load_config(config_path)
    n_pairs = pairs if pairs is not None else cfg.match.pairs
    match_seed = seed if seed is not None else cfg.match.seed
    result = run_duplicate_match(
        cfg.spec,
        _agent_factory(agent_a, cfg),
        _agent_factory(agent_b, cfg),
        n_pairs=n_pairs,
        seed=match_seed,
    )
    click.echo(
        f"hands={result.hands_played} net_a={result.net_a:+d} chips "
        f"bb_per_100_a={result.bb_per_100_a:+.3f} forfeits={result.forfeits}"
    )
    if n_pairs >= 2:
        v = result.variance()
        verdict = "yes" if v.reduced_95 else "no"
        click.echo(
            f"variance: duplicate {v.var_dup:.3f} vs independent {v.var_ind:.3f} "
            f"(z={v.z:.2f}, reduced at 95%: {verdict})"
        )
    out = log_path if log_path is not None else cfg.match.log_path
    if out:
        write_hand_log(out, result)
        click.echo(f"hand log written to {out}")


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True, dir_okay=False), required=True)
@_friendly
def report(log_path):
    """Summarize a JSONL hand log."""
    lines = [json.loads(line) for line in Path(log_path).read_text().splitlines()]
    if not lines or lines[0].get("kind") != "match_header":
        raise click.ClickException("not a match log: missing header record")
    header, plays = lines[0], lines[1:]
    click.echo(
        f"spec={header['spec']} pairs={header['pairs']} seed={header['seed']} "
        f"schema={header['schema_version']}"
    )
    net = header["net_a"]
    hands = len(plays)
    rate = bb_per_100(net, header["big_blind"], hands) if hands else 0.0
    events = sum(sum(p["events_by_seat"]) for p in plays)
    worst = max((max(p["divergence_by_seat"]) for p in plays), default=0)
    click.echo(
        f"hands={hands} net_a={net:+d} chips bb_per_100_a={rate:+.3f} "
        f"forfeits={header['forfeits']}"
    )
    click.echo(f"observed-bet translations={events} worst_pot_divergence={worst}")


# ── endgame re-solving ─────────────────────────────────────────────


def _parse_cards(spec, text: str) -> tuple[int, ...]:
    deck = spec.deck()
    step = 1 if len(spec.suits) == 1 else 2
    if len(text) % step:
        raise click.ClickException(f"malformed card text {text!r}")
    return tuple(deck.parse_card(text[i : i + step]) for i in range(0, len(text), step))


@main.command()
@config_option
@click.option("--pot", type=int, required=True, help="True pot at the final round, in chips.")
@click.option("--stacks", required=True, help="Remaining stacks, e.g. 7,7.")
@click.option("--board", default="", help="Board by round, '/'-separated, e.g. /Qs.")
@click.option("--history", default="", help="Betting before the final round, '/'-separated.")
@click.option("--buckets", type=int, default=None, help="Hand buckets per side.")
@_friendly
def endgame(config_path, pot, stacks, board, history, buckets):
    """Re-solve a final betting round at the true pot and stacks.

    Hand ranges replay the given line under the configured abstraction with
    uniform play at unknown positions.
    """
    cfg = load_config(config_path)
    spec = cfg.spec
    try:
        stack_pair = tuple(int(s) for s in stacks.split(","))
    except ValueError:
        raise click.ClickException(f"malformed stacks {stacks!r}") from None
    if len(stack_pair) != 2:
        raise click.ClickException("stacks must be two comma-separated integers")
    segments = board.split("/") if board else [""] * spec.num_rounds
    if len(segments) != spec.num_rounds:
        raise click.ClickException(
            f"board needs {spec.num_rounds} '/'-separated segments, got {len(segments)}"
        )
    boards = tuple(_parse_cards(spec, seg) for seg in segments)
    lines = tuple(history.split("/")) if history else ("",) * (spec.num_rounds - 1)
    if len(lines) != spec.num_rounds - 1:
        raise click.ClickException(
            f"history needs {spec.num_rounds - 1} '/'-separated segments, got {len(lines)}"
        )
    k = buckets if buckets is not None else cfg.agent.ending_buckets
    empty = StrategyTable()
    sol = solve_endgame(
        spec,
        cfg.abstraction,
        empty,
        empty,
        boards,
        lines,
        pot=pot,
        stacks=(stack_pair[0], stack_pair[1]),
        k=k,
    )
    click.echo(
        f"value={sol.value:+.6f} chips pot_share={sol.pot_fraction_claim():.6f} "
        f"duality_gap={sol.duality_gap:.2e} best_response_gap={sol.best_response_gap:.2e}"
    )
    click.echo(
        f"buckets: {len(sol.bucket_names[0])} for first seat, "
        f"{len(sol.bucket_names[1])} for second seat"
    )


# ── experiments ────────────────────────────────────────────────────


@main.group()
def experiment():
    """Gauntlet experiments on constructed games."""


@experiment.command()
@click.option("--trials", type=int, default=10_000)
@click.option("--seed", type=int, default=0)
@click.option("--full-size", type=int, default=4)
@click.option("--abstract-size", type=int, default=3)
@_friendly
def purification(trials, seed, full_size, abstract_size):
    """Purified vs mixed abstract equilibria across random matrix games."""
    summary = matrix_purification_experiment(
        trials=trials, seed=seed, full_size=full_size, abstract_size=abstract_size
    )
    click.echo(summary.to_json())
    verdict = "yes" if summary.ci_low > 0 else "no"
    click.echo(
        f"mean gain {summary.mean_difference:+.6f} "
        f"(95% CI [{summary.ci_low:+.6f}, {summary.ci_high:+.6f}]), "
        f"purification helps: {verdict}"
    )


# ── payouts ────────────────────────────────────────────────────────


@main.command()
@click.argument("profits", nargs=4, type=float)
@_friendly
def payouts(profits):
    """Split the $100,000 prize pool over four finishers (best first)."""
    cents = compute_payouts(profits)
    for rank, amount in enumerate(cents, start=1):
        click.echo(f"place {rank}: ${amount / 100:.2f}")
    click.echo(f"total: ${sum(cents) / 100:.2f}")


# ── service ────────────────────────────────────────────────────────


@main.command()
@config_option
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@_friendly
def serve(config_path, host, port):
    """Run the interactive table service."""
    try:
        import uvicorn
    except ImportError:
        raise click.ClickException(
            "uvicorn is not installed; install the 'serve' extra"
        ) from None
    from .service import build_app

    cfg = load_config(config_path)
    app = build_app(cfg)
    uvicorn.run(
        app,
        host=host if host is not None else cfg.service.host,
        port=port if port is not None else cfg.service.port,
    )


if __name__ == "__main__":
    main()
