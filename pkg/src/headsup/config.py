"""Run configuration: a TOML file merged with environment overrides.

Sections mirror the pipeline: which game to play, how to discretize it,
how to train, how to sharpen the trained table, how agents behave at the
table, and how matches and the service run.  Environment variables of the
form ``HEADSUP_<SECTION>__<KEY>`` override file values; their text is read
as a TOML literal when possible and as a plain string otherwise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Mapping

import tomli

from .abstraction import (
    ALL_IN,
    BUCKET_MAP_VERSION,
    Abstraction,
    BucketMap,
    build_action_grid,
    build_equity_bucket_map,
    default_grid,
)
from .game import GameSpec, preset
from .postprocess import PostProcessError, ThresholdSchedule

ENV_PREFIX = "HEADSUP_"

_KNOWN_KEYS = {
    "game": {"preset"},
    "abstraction": {"open_fractions", "raise_fractions", "buckets_per_round"},
    "solve": {"algorithm", "iterations", "seed"},
    "postprocess": {"mode", "thresholds"},
    "agent": {"use_ending", "ending_buckets"},
    "match": {"pairs", "seed", "log_path"},
    "service": {"host", "port", "opponent", "seed"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolveSettings:
    algorithm: str = "chance_sampled"  # or "vanilla"
    iterations: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class PostprocessSettings:
    mode: str = "none"  # none | threshold | purify
    thresholds: tuple[float, ...] = ()

    def schedule(self) -> ThresholdSchedule | None:
        if self.mode == "none":
            return None
        thresholds = self.thresholds or (0.0,)
        return ThresholdSchedule(thresholds=thresholds, mode=self.mode)


@dataclass(frozen=True)
class AgentSettings:
    use_ending: bool = False
    ending_buckets: int = 8


@dataclass(frozen=True)
class MatchSettings:
    pairs: int = 100
    seed: int = 0
    log_path: str | None = None


@dataclass(frozen=True)
class ServiceSettings:
    host: str = "127.0.0.1"
    port: int = 8000
    opponent: str = "call_station"
    seed: int = 0


@dataclass
class RunConfig:
    spec: GameSpec
    abstraction: Abstraction
    solve: SolveSettings
    postprocess: PostprocessSettings
    agent: AgentSettings
    match: MatchSettings
    service: ServiceSettings


def _parse_fraction(value) -> float:
    if value == "all-in":
        return ALL_IN
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"bet fraction must be a number or 'all-in', got {value!r}")


def _parse_rows(rows) -> list[list[float]]:
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ConfigError("bet fractions must be a list of per-round rows")
    return [[_parse_fraction(v) for v in row] for row in rows]


def build_bucketed_abstraction(
    spec: GameSpec, grid, buckets_per_round: list[int]
) -> Abstraction:
    """Equity-percentile hand buckets per round; 0 leaves a round lossless.

    Every board reachable at a round is enumerated, so this is meant for
    the small training games.
    """
    if len(buckets_per_round) != spec.num_rounds:
        raise ConfigError("buckets_per_round must list one entry per round")
    deck_cards = range(len(spec.ranks) * len(spec.suits))
    per_round: list[dict[str, int] | None] = []
    for rnd, k in enumerate(buckets_per_round):
        if k == 0:
            per_round.append(None)
            continue
        if k < 0:
            raise ConfigError("bucket counts cannot be negative")
        shown = sum(spec.board_per_round[: rnd + 1])
        boards = [tuple(b) for b in combinations(deck_cards, shown)]
        per_round.append(build_equity_bucket_map(spec, boards, rnd, k))
    return Abstraction(
        grid=grid, buckets=BucketMap(version=BUCKET_MAP_VERSION, per_round=per_round)
    )


def _parse_env_value(raw: str):
    try:
        return tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        return raw


def _merge_env(data: dict, env: Mapping[str, str]) -> dict:
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, _, key = name[len(ENV_PREFIX) :].partition("__")
        section, key = section.lower(), key.lower()
        data.setdefault(section, {})[key] = _parse_env_value(raw)
    return data


def _check_known(data: dict) -> None:
    for section, values in data.items():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"config section {section!r} must be a table")
        for key in values:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section {section!r}")


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> RunConfig:
    data: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    data = _merge_env(data, os.environ if env is None else env)
    _check_known(data)

    game = data.get("game", {})
    spec = preset(game.get("preset", "leduc"))

    ab = data.get("abstraction", {})
    grid = None
    if "open_fractions" in ab:
        raise_rows = _parse_rows(ab["raise_fractions"]) if "raise_fractions" in ab else None
        grid = build_action_grid(_parse_rows(ab["open_fractions"]), raise_rows)
    elif "raise_fractions" in ab:
        raise ConfigError("raise_fractions requires open_fractions")
    elif spec.bet_structure == "no_limit":
        grid = default_grid()
    if "buckets_per_round" in ab:
        buckets = ab["buckets_per_round"]
        if not isinstance(buckets, list) or not all(isinstance(b, int) for b in buckets):
            raise ConfigError("buckets_per_round must be a list of integers")
        abstraction = build_bucketed_abstraction(spec, grid, buckets)
    else:
        abstraction = Abstraction(grid=grid, buckets=None)

    sv = data.get("solve", {})
    solve = SolveSettings(
        algorithm=sv.get("algorithm", "chance_sampled"),
        iterations=int(sv.get("iterations", 100_000)),
        seed=int(sv.get("seed", 0)),
    )
    if solve.algorithm not in ("vanilla", "chance_sampled"):
        raise ConfigError(f"unknown solve algorithm {solve.algorithm!r}")
    if solve.iterations < 1:
        raise ConfigError("solve iterations must be positive")

    pp = data.get("postprocess", {})
    post = PostprocessSettings(
        mode=pp.get("mode", "none"),
        thresholds=tuple(float(t) for t in pp.get("thresholds", ())),
    )
    if post.mode not in ("none", "threshold", "purify"):
        raise ConfigError(f"unknown postprocess mode {post.mode!r}")
    try:
        post.schedule()  # validates threshold ranges eagerly
    except PostProcessError as exc:
        raise ConfigError(str(exc)) from None

    ag = data.get("agent", {})
    agent = AgentSettings(
        use_ending=bool(ag.get("use_ending", False)),
        ending_buckets=int(ag.get("ending_buckets", 8)),
    )
    if agent.ending_buckets < 1:
        raise ConfigError("ending_buckets must be positive")

    mt = data.get("match", {})
    match = MatchSettings(
        pairs=int(mt.get("pairs", 100)),
        seed=int(mt.get("seed", 0)),
        log_path=mt.get("log_path"),
    )
    if match.pairs < 1:
        raise ConfigError("match pairs must be positive")

    sc = data.get("service", {})
    service = ServiceSettings(
        host=sc.get("host", "127.0.0.1"),
        port=int(sc.get("port", 8000)),
        opponent=sc.get("opponent", "call_station"),
        seed=int(sc.get("seed", 0)),
    )
    if service.opponent not in ("call_station", "uniform", "all_in"):
        raise ConfigError(f"unknown service opponent {service.opponent!r}")

    return RunConfig(
        spec=spec,
        abstraction=abstraction,
        solve=solve,
        postprocess=post,
        agent=agent,
        match=match,
        service=service,
    )
