from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from negolab.core import (
    OracleAnnotation,
    Project,
    Purchase,
    Scenario,
    load_builtin_scenarios,
    settle_round,
)
from negolab.engine import GameConfig, GameTrace, RoundRecord, TurnEvent


@pytest.fixture(scope="session")
def scenarios() -> dict[str, Scenario]:
    return load_builtin_scenarios()


@pytest.fixture(scope="session")
def gen_012(scenarios) -> Scenario:
    return scenarios["gen_012"]


@pytest.fixture
def tiny_scenario() -> Scenario:
    """A hand-sized scenario whose numbers are easy to verify on paper.

    Supply r1=10, r2=10, r3=6; costs 1/1.5/3; budget 18; max 2 types.
    Agent A: pa needs 2 r1 -> 3; Agent B: pb needs 2 r2 -> 3.
    Fully disjoint: V1 = V2 = 15 (5 runs each), M = 30.
    """
    from negolab.core import DEFAULT_ENV

    a = Project("pa", {"r1": 2}, 3)
    b = Project("pb", {"r2": 2}, 3)
    scenario = Scenario(
        scenario_id="tiny",
        env=DEFAULT_ENV,
        agent_projects=((a,), (b,)),
    )
    annotation = OracleAnnotation(
        v1=15,
        v2=15,
        m=30,
        optimal_joint_allocations=(
            (Purchase({"r1": 10}), Purchase({"r2": 10}), 15, 15),
        ),
    )
    return scenario.with_oracle(annotation)


def make_trace(
    scenario: Scenario,
    round_specs: list[dict],
    *,
    partner_stability: str = "stable",
    project_rotation: str = "fixed",
    enable_cheap_talk: bool = True,
    theme_id: str = "identity",
    game_id: str = "fixture_game",
    agent_names: tuple[str, str] = ("agent_a", "agent_b"),
) -> GameTrace:
    """Build a trace from per-round decision specs, settling for real.

    Each spec: {"a": {...quantities}, "b": {...}, optional "turns": [...],
    "early": (bool,bool), "fallback": bool}.
    """
    config = GameConfig(
        scenario_ids=(scenario.scenario_id,),
        num_rounds=len(round_specs),
        partner_stability=partner_stability,
        project_rotation=project_rotation,
        enable_cheap_talk=enable_cheap_talk,
        theme_id=theme_id,
        game_id=game_id,
    )
    rounds = []
    cumulative = [0, 0]
    for i, spec in enumerate(round_specs, start=1):
        pa, pb = Purchase(spec["a"]), Purchase(spec["b"])
        outcome = settle_round(pa, pb, scenario)
        cumulative[0] += outcome.rewards[0]
        cumulative[1] += outcome.rewards[1]
        turns = tuple(
            TurnEvent(
                round_number=i,
                turn_index=t,
                speaker=turn.get("speaker", t % 2),
                thinking=turn.get("thinking", ""),
                speech=turn.get("speech", ""),
                action=None,
                phase="cheap_talk",
            )
            for t, turn in enumerate(spec.get("turns", []))
        )
        rounds.append(
            RoundRecord(
                round_number=i,
                scenario_id=scenario.scenario_id,
                turns=turns,
                decisions=(pa, pb),
                outcome=outcome,
                early_decision=tuple(spec.get("early", (False, False))),
                fallback=spec.get("fallback", False),
            )
        )
    return GameTrace(
        game_id=game_id,
        experiment_run_id=None,
        config=config,
        rounds=tuple(rounds),
        reflections=(None, None),
        cumulative_rewards=(cumulative[0], cumulative[1]),
        agent_names=agent_names,
    )


@pytest.fixture
def trace_builder():
    return make_trace
