"""Iterated-game state machine.

Runs a two-seat game round by round: cheap-talk exchange with early
finalization, forced decision phase, simultaneous settlement, condition
handling (partner stability, rotation, transparency, interventions), and
trace emission. Turn order is semantically load-bearing, so one game is a
single sequential session; distinct games share no mutable state.
"""

from __future__ import annotations

import dataclasses
import json
import uuid
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from . import prompts
from .agents import Agent, AgentErrorEvent, AgentResponse, ZERO_PURCHASE
from .core import (
    Purchase,
    RoundOutcome,
    Scenario,
    settle_round,
    validate_purchase,
)
from .forge import IDENTITY_THEME, ThemedScenario, apply_theme, load_themes

# The context-resetting seat in shifting games is always seat 1 ("agent B"),
# keeping seat 0's learning trajectory intact across rounds.
SHIFTING_SEAT = 1

# Runaway guard for unlimited-talk rounds (cheap_talk_turns = 0).
UNLIMITED_TALK_CAP = 50


@dataclass(frozen=True)
class GameConfig:
    scenario_ids: tuple[str, ...]
    num_rounds: int = 4
    cheap_talk_turns: int = 5  # 0 = unlimited
    partner_stability: str = "stable"  # stable | shifting
    project_rotation: str = "fixed"  # fixed | rotating
    first_speaker: int = 0
    enable_cheap_talk: bool = True
    thinking_enabled: bool = True
    transparency: str = "none"  # none | requirements | requirements_and_rewards
    intervention: str = "none"  # none | share_projects | theory_of_mind
    theme_id: str = "identity"
    seed: int = 0
    game_id: Optional[str] = None
    experiment_run_id: Optional[str] = None

    def __post_init__(self):
        if self.num_rounds < 1:
            raise ValueError("num_rounds must be >= 1")
        if self.cheap_talk_turns < 0:
            raise ValueError("cheap_talk_turns must be >= 0 (0 = unlimited)")
        if self.first_speaker not in (0, 1):
            raise ValueError("first_speaker must be 0 or 1")
        if self.partner_stability not in ("stable", "shifting"):
            raise ValueError(f"unknown partner_stability {self.partner_stability!r}")
        if self.project_rotation not in ("fixed", "rotating"):
            raise ValueError(f"unknown project_rotation {self.project_rotation!r}")
        if self.transparency not in ("none", "requirements", "requirements_and_rewards"):
            raise ValueError(f"unknown transparency {self.transparency!r}")
        if self.intervention not in ("none", "share_projects", "theory_of_mind"):
            raise ValueError(f"unknown intervention {self.intervention!r}")
        scenario_ids = tuple(self.scenario_ids)
        object.__setattr__(self, "scenario_ids", scenario_ids)
        if self.project_rotation == "rotating":
            if len(scenario_ids) != self.num_rounds:
                raise ValueError("rotating games need one scenario id per round")
        elif len(scenario_ids) != 1:
            raise ValueError("fixed games need exactly one scenario id")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["scenario_ids"] = list(self.scenario_ids)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "GameConfig":
        data = dict(data)
        data["scenario_ids"] = tuple(data["scenario_ids"])
        return cls(**data)


def pair_with_role_swap(config: GameConfig) -> tuple[GameConfig, GameConfig]:
    """The config and its first-speaker-swapped twin, sharing all else."""
    twin = replace(
        config,
        first_speaker=1 - config.first_speaker,
        game_id=f"{config.game_id}_swap" if config.game_id else None,
    )
    return config, twin


@dataclass(frozen=True)
class TurnEvent:
    round_number: int
    turn_index: int
    speaker: int
    thinking: str
    speech: str
    action: Optional[Purchase]
    phase: str  # cheap_talk | decision
    api_meta: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "round": self.round_number,
            "turn_index": self.turn_index,
            "speaker": self.speaker,
            "thinking": self.thinking,
            "speech": self.speech,
            "action": self.action.to_dict() if self.action is not None else None,
            "phase": self.phase,
            "api_meta": self.api_meta,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TurnEvent":
        return cls(
            round_number=data["round"],
            turn_index=data["turn_index"],
            speaker=data["speaker"],
            thinking=data["thinking"],
            speech=data["speech"],
            action=Purchase.from_dict(data["action"]) if data["action"] is not None else None,
            phase=data["phase"],
            api_meta=data.get("api_meta"),
        )


@dataclass(frozen=True)
class RoundRecord:
    round_number: int
    scenario_id: str
    turns: tuple[TurnEvent, ...]
    decisions: tuple[Purchase, Purchase]
    outcome: RoundOutcome
    errors: tuple[AgentErrorEvent, ...] = ()
    early_decision: tuple[bool, bool] = (False, False)
    fallback: bool = False  # a decision was auto-filled; exclude from analysis

    def to_dict(self) -> dict:
        return {
            "round": self.round_number,
            "scenario_id": self.scenario_id,
            "turns": [t.to_dict() for t in self.turns],
            "decisions": [d.to_dict() for d in self.decisions],
            "outcome": self.outcome.to_dict(),
            "errors": [e.to_dict() for e in self.errors],
            "early_decision": list(self.early_decision),
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RoundRecord":
        from fractions import Fraction

        out = data["outcome"]
        outcome = RoundOutcome(
            annulled=out["annulled"],
            rewards=tuple(out["rewards"]),
            realized_runs=tuple(out["realized_runs"]),
            joint_reward=out["joint_reward"],
            efficiency=(
                Fraction(out["efficiency"]).limit_denominator(10**9)
                if out["efficiency"] is not None
                else None
            ),
        )
        return cls(
            round_number=data["round"],
            scenario_id=data["scenario_id"],
            turns=tuple(TurnEvent.from_dict(t) for t in data["turns"]),
            decisions=tuple(Purchase.from_dict(d) for d in data["decisions"]),
            outcome=outcome,
            errors=tuple(
                AgentErrorEvent(e["kind"], e["round"], e["attempt"], e["detail"])
                for e in data["errors"]
            ),
            early_decision=tuple(data["early_decision"]),
            fallback=data["fallback"],
        )


@dataclass(frozen=True)
class GameTrace:
    game_id: str
    experiment_run_id: Optional[str]
    config: GameConfig
    rounds: tuple[RoundRecord, ...]
    reflections: tuple[Optional[str], Optional[str]]
    cumulative_rewards: tuple[int, int]
    seat_contexts: tuple[tuple[dict, ...], tuple[dict, ...]] = ((), ())
    agent_names: tuple[str, str] = ("agent_a", "agent_b")

    def to_dict(self) -> dict:
        return {
            "game_id": self.game_id,
            "experiment_run_id": self.experiment_run_id,
            "config": self.config.to_dict(),
            "rounds": [r.to_dict() for r in self.rounds],
            "reflections": list(self.reflections),
            "cumulative_rewards": list(self.cumulative_rewards),
            "seat_contexts": [list(c) for c in self.seat_contexts],
            "agent_names": list(self.agent_names),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: Mapping) -> "GameTrace":
        return cls(
            game_id=data["game_id"],
            experiment_run_id=data.get("experiment_run_id"),
            config=GameConfig.from_dict(data["config"]),
            rounds=tuple(RoundRecord.from_dict(r) for r in data["rounds"]),
            reflections=tuple(data["reflections"]),
            cumulative_rewards=tuple(data["cumulative_rewards"]),
            seat_contexts=tuple(
                tuple(dict(m) for m in c) for c in data.get("seat_contexts", [(), ()])
            ),
            agent_names=tuple(data.get("agent_names", ("agent_a", "agent_b"))),
        )

    @classmethod
    def load(cls, path: Path | str) -> "GameTrace":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.to_json() + "\n")


def derive_game_id(config: GameConfig) -> str:
    """Deterministic id from the config, so replays collide instead of forking."""
    payload = json.dumps(
        {k: v for k, v in config.to_dict().items() if k != "game_id"}, sort_keys=True
    )
    return str(uuid.uuid5(uuid.NAMESPACE_URL, "negolab:" + payload))


def _resolve_theme(theme_id: str):
    if theme_id == "identity":
        return IDENTITY_THEME
    themes = load_themes()
    if theme_id not in themes:
        raise ValueError(f"unknown theme {theme_id!r}")
    return themes[theme_id]


class _Seat:
    """One seat's prompt stream. Consecutive user texts merge into one message
    so the history stays strictly alternating for chat APIs."""

    def __init__(self, system: str):
        self.messages: list[dict] = [{"role": "system", "content": system}]

    def reset(self, system: str) -> None:
        self.messages = [{"role": "system", "content": system}]

    def push_user(self, text: str) -> None:
        if self.messages and self.messages[-1]["role"] == "user":
            self.messages[-1] = {
                "role": "user",
                "content": self.messages[-1]["content"] + "\n\n" + text,
            }
        else:
            self.messages.append({"role": "user", "content": text})

    def push_assistant(self, response: AgentResponse) -> None:
        payload = {
            "thinking": response.thinking,
            "speech": response.speech,
            "action": response.action.to_dict() if response.action is not None else None,
        }
        self.messages.append({"role": "assistant", "content": json.dumps(payload)})


def _abstract_purchase(purchase: Purchase, themed: ThemedScenario) -> Purchase:
    """Map themed resource names in an agent's purchase back to abstract ids."""
    return Purchase(
        quantities=themed.parse_quantities(dict(purchase.quantities)),
        runs=dict(purchase.runs) if purchase.runs is not None else None,
    )


def visible_context(trace: GameTrace, seat: int) -> list[dict]:
    """The full prompt stream one seat saw over the game, as recorded."""
    return [dict(m) for m in trace.seat_contexts[seat]]


def run_game(
    config: GameConfig,
    agents: Sequence[Agent],
    scenario_provider: Mapping[str, Scenario] | Callable[[str], Scenario],
    observer: Optional[Callable[[dict], None]] = None,
) -> GameTrace:
    if len(agents) != 2:
        raise ValueError("exactly two agents required")
    resolve = (
        scenario_provider.__getitem__
        if isinstance(scenario_provider, Mapping)
        else scenario_provider
    )
    per_round = (
        [resolve(sid) for sid in config.scenario_ids]
        if config.project_rotation == "rotating"
        else [resolve(config.scenario_ids[0])] * config.num_rounds
    )
    theme = _resolve_theme(config.theme_id)
    game_id = config.game_id or derive_game_id(config)

    def emit(kind: str, **payload) -> None:
        if observer is not None:
            observer({"kind": kind, "game_id": game_id, **payload})

    def system_for(seat: int, themed: ThemedScenario, single_round: bool) -> str:
        return prompts.build_system_prompt(
            seat,
            themed,
            thinking_enabled=config.thinking_enabled,
            partner_stability=config.partner_stability,
            transparency=config.transparency,
            intervention=config.intervention,
            single_round_view=single_round,
        )

    themed0 = apply_theme(per_round[0], theme)
    seats = [
        _Seat(system_for(0, themed0, False)),
        _Seat(
            system_for(1, themed0, config.partner_stability == "shifting")
        ),
    ]

    rounds: list[RoundRecord] = []
    cumulative = [0, 0]
    shifting = config.partner_stability == "shifting"

    for round_number in range(1, config.num_rounds + 1):
        scenario = per_round[round_number - 1]
        themed = apply_theme(scenario, theme)
        for agent in agents:
            agent.begin_round(round_number, scenario)

        rebuilt = [False, False]
        if round_number > 1 and shifting:
            seats[SHIFTING_SEAT].reset(system_for(SHIFTING_SEAT, themed, True))
            rebuilt[SHIFTING_SEAT] = True
        rotated = config.project_rotation == "rotating" and round_number > 1
        notice_due = [rotated and not rebuilt[s] for s in (0, 1)]

        def seat_validator(seat: int, _themed=themed, _scn=scenario):
            def check(p: Purchase) -> list[str]:
                return validate_purchase(
                    _abstract_purchase(p, _themed), _scn.env, _scn.projects_for(seat)
                )

            return check

        # Shown round number: the shifting seat's view is rebuilt per round, so
        # its prompts present the current round as round 1 of 1.
        def round_view(seat: int) -> tuple[int, int]:
            if shifting and seat == SHIFTING_SEAT:
                return 1, 1
            return round_number, config.num_rounds

        turns: list[TurnEvent] = []
        errors: list[AgentErrorEvent] = []
        decisions: list[Optional[Purchase]] = [None, None]
        early = [False, False]
        fallback = False
        turn_index = 0
        talk_count = [0, 0]
        pending_speech: list[Optional[str]] = [None, None]  # undelivered, by speaker
        spoke_before = [False, False]
        limit = config.cheap_talk_turns if config.cheap_talk_turns > 0 else UNLIMITED_TALK_CAP

        def take(seat: int, phase: str) -> tuple[AgentResponse, Purchase | None]:
            nonlocal turn_index, fallback
            response, events = agents[seat].take_turn(
                seats[seat].messages, phase, round_number, seat_validator(seat)
            )
            errors.extend(events)
            if any(e.kind == "decision_auto_filled" for e in events):
                fallback = True
            seats[seat].push_assistant(response)
            action_abs = (
                _abstract_purchase(response.action, themed)
                if response.action is not None
                else None
            )
            event = TurnEvent(
                round_number=round_number,
                turn_index=turn_index,
                speaker=seat,
                thinking=response.thinking,
                speech=response.speech,
                action=action_abs,
                phase=phase,
                api_meta=response.api_meta,
            )
            turns.append(event)
            emit("turn", round=round_number, turn_index=turn_index, speaker=seat,
                 speech=response.speech, finalized=action_abs is not None, phase=phase)
            turn_index += 1
            return response, action_abs

        def deliver_opponent(seat: int) -> Optional[str]:
            other = 1 - seat
            speech, pending_speech[other] = pending_speech[other], None
            return speech

        def issue_decision(seat: int) -> None:
            opponent_speech = deliver_opponent(seat)
            preamble = None
            if opponent_speech is not None:
                preamble = prompts.render(
                    "cheap_talk_opponent_said", opponent_message=opponent_speech
                )
            if not config.enable_cheap_talk and notice_due[seat]:
                notice = prompts.rotation_notice(themed, seat)
                preamble = notice if preamble is None else notice + "\n\n" + preamble
                notice_due[seat] = False
            seats[seat].push_user(
                prompts.decision_prompt(
                    scenario.env,
                    thinking_enabled=config.thinking_enabled,
                    preamble=preamble,
                )
            )
            _, action = take(seat, "decision")
            decisions[seat] = action if action is not None else ZERO_PURCHASE
            emit("decision", round=round_number, seat=seat)

        if config.enable_cheap_talk:
            current = config.first_speaker
            while decisions[0] is None or decisions[1] is None:
                if decisions[current] is not None:
                    current = 1 - current
                    continue
                other = 1 - current
                if decisions[other] is not None or talk_count[current] >= limit:
                    issue_decision(current)
                    current = other
                    continue
                shown_round, shown_total = round_view(current)
                opponent_speech = deliver_opponent(current)
                if not spoke_before[current]:
                    text = prompts.cheap_talk_prompt(
                        shown_round,
                        shown_total,
                        config.cheap_talk_turns,
                        thinking_enabled=config.thinking_enabled,
                        opponent_message=opponent_speech,
                        rotation_notice=(
                            prompts.rotation_notice(themed, current)
                            if notice_due[current]
                            else None
                        ),
                        tom_reminder=config.intervention == "theory_of_mind",
                    )
                    notice_due[current] = False
                else:
                    text = prompts.followup_prompt(
                        opponent_speech or "", thinking_enabled=config.thinking_enabled
                    )
                seats[current].push_user(text)
                response, action = take(current, "cheap_talk")
                spoke_before[current] = True
                talk_count[current] += 1
                pending_speech[current] = response.speech
                if action is not None:
                    decisions[current] = action
                    if talk_count[current] < limit:
                        early[current] = True
                    emit("decision", round=round_number, seat=current)
                current = other
        else:
            for seat in (config.first_speaker, 1 - config.first_speaker):
                issue_decision(seat)

        decision_a, decision_b = decisions[0], decisions[1]
        assert decision_a is not None and decision_b is not None
        outcome = settle_round(decision_a, decision_b, scenario)
        cumulative[0] += outcome.rewards[0]
        cumulative[1] += outcome.rewards[1]
        for seat in (0, 1):
            seats[seat].push_user(
                prompts.round_result_message(
                    outcome, seat, decisions[seat], decisions[1 - seat], themed
                )
            )
        record = RoundRecord(
            round_number=round_number,
            scenario_id=scenario.scenario_id,
            turns=tuple(turns),
            decisions=(decision_a, decision_b),
            outcome=outcome,
            errors=tuple(errors),
            early_decision=(early[0], early[1]),
            fallback=fallback,
        )
        rounds.append(record)
        emit("round_settled", round=round_number, outcome=outcome.to_dict())

    reflections: list[Optional[str]] = [None, None]
    if config.enable_cheap_talk:
        theoretical_max = sum(
            s.oracle.m for s in per_round if s.oracle is not None
        )
        for seat in (0, 1):
            seats[seat].push_user(
                prompts.reflection_prompt(
                    config.num_rounds,
                    cumulative[seat],
                    cumulative[1 - seat],
                    theoretical_max,
                )
            )
            reflections[seat] = agents[seat].reflect(seats[seat].messages)

    trace = GameTrace(
        game_id=game_id,
        experiment_run_id=config.experiment_run_id,
        config=config,
        rounds=tuple(rounds),
        reflections=(reflections[0], reflections[1]),
        cumulative_rewards=(cumulative[0], cumulative[1]),
        seat_contexts=(
            tuple(dict(m) for m in seats[0].messages),
            tuple(dict(m) for m in seats[1].messages),
        ),
    )
    emit("game_over", cumulative_rewards=list(cumulative))
    return trace
