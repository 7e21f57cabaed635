"""Trace and label persistence plus relational export.

Storage is append-only JSONL per experiment: one line per game trace,
idempotent on game_id, guarded by a consistency check that re-settles every
round from the recorded decisions. No external database is required.
"""

from __future__ import annotations

import json
import uuid
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .core import Scenario, settle_round
from .engine import GameTrace
from .judge import JudgeAnnotation


class ConsistencyError(ValueError):
    """A trace's recorded outcomes disagree with re-settlement."""

    def __init__(self, diffs: list[str]):
        super().__init__("; ".join(diffs))
        self.diffs = diffs


def check_trace_consistency(
    trace: GameTrace, scenarios: Mapping[str, Scenario]
) -> list[str]:
    """Recompute every round's settlement from the recorded decisions and
    diff it against the recorded outcome. Empty list = consistent."""
    diffs: list[str] = []
    for record in trace.rounds:
        scenario = scenarios.get(record.scenario_id)
        if scenario is None:
            diffs.append(f"round {record.round_number}: unknown scenario {record.scenario_id}")
            continue
        recomputed = settle_round(record.decisions[0], record.decisions[1], scenario)
        recorded = record.outcome
        for fld in ("annulled", "rewards", "joint_reward", "efficiency"):
            got = getattr(recorded, fld)
            want = getattr(recomputed, fld)
            if fld == "rewards":
                got, want = tuple(got), tuple(want)
            if got != want:
                diffs.append(
                    f"round {record.round_number}: {fld} recorded {got!r} != recomputed {want!r}"
                )
    expected_cum = [0, 0]
    for record in trace.rounds:
        expected_cum[0] += record.outcome.rewards[0]
        expected_cum[1] += record.outcome.rewards[1]
    if tuple(expected_cum) != tuple(trace.cumulative_rewards):
        diffs.append(
            f"cumulative rewards recorded {tuple(trace.cumulative_rewards)} "
            f"!= recomputed {tuple(expected_cum)}"
        )
    return diffs


class TraceStore:
    """Append-only JSONL store of game traces, one line per game."""

    def __init__(self, root: Path | str, scenarios: Mapping[str, Scenario]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.scenarios = dict(scenarios)
        self._index: dict[str, GameTrace] = {}
        self._load()

    @property
    def trace_file(self) -> Path:
        return self.root / "traces.jsonl"

    @property
    def label_file(self) -> Path:
        return self.root / "labels.jsonl"

    def _load(self) -> None:
        if self.trace_file.exists():
            with open(self.trace_file) as fh:
                for line in fh:
                    if line.strip():
                        trace = GameTrace.from_dict(json.loads(line))
                        self._index[trace.game_id] = trace

    def persist_trace(self, trace: GameTrace) -> str:
        """Durable append; idempotent on game_id; rejects inconsistent traces."""
        diffs = check_trace_consistency(trace, self.scenarios)
        if diffs:
            raise ConsistencyError(diffs)
        existing = self._index.get(trace.game_id)
        if existing is not None:
            if existing.to_json() != trace.to_json():
                raise ConsistencyError(
                    [f"game_id {trace.game_id} already stored with different content"]
                )
            return trace.game_id
        with open(self.trace_file, "a") as fh:
            fh.write(json.dumps(trace.to_dict(), sort_keys=True) + "\n")
            fh.flush()
        self._index[trace.game_id] = trace
        return trace.game_id

    def get_trace(self, game_id: str) -> GameTrace:
        return self._index[game_id]

    def has_trace(self, game_id: str) -> bool:
        return game_id in self._index

    def list_traces(self) -> list[GameTrace]:
        return list(self._index.values())

    def persist_annotations(self, annotations: Sequence[JudgeAnnotation]) -> None:
        with open(self.label_file, "a") as fh:
            for a in annotations:
                fh.write(json.dumps(a.to_dict(), sort_keys=True) + "\n")
            fh.flush()

    def load_annotations(self) -> list[JudgeAnnotation]:
        out = []
        if self.label_file.exists():
            with open(self.label_file) as fh:
                for line in fh:
                    if line.strip():
                        out.append(JudgeAnnotation.from_dict(json.loads(line)))
        return out


# --- relational export ------------------------------------------------------

RELATIONAL_TABLES = ("games", "rounds", "turns", "decisions", "labels")


def export_relational(
    traces: Sequence[GameTrace],
    annotations: Sequence[JudgeAnnotation] = (),
) -> dict[str, list[dict]]:
    """Flat analysis tables. Deterministic: sorted by primary keys.

    games(game_id, ...config...), rounds keyed (game_id, round), turns keyed
    (game_id, round, turn_index), decisions keyed (game_id, round, seat),
    labels keyed (game_id, round, label).
    """
    games, rounds, turns, decisions, labels = [], [], [], [], []
    for trace in sorted(traces, key=lambda t: t.game_id):
        cfg = trace.config
        games.append(
            {
                "game_id": trace.game_id,
                "experiment_run_id": trace.experiment_run_id,
                "scenario_ids": ",".join(cfg.scenario_ids),
                "num_rounds": cfg.num_rounds,
                "partner_stability": cfg.partner_stability,
                "project_rotation": cfg.project_rotation,
                "transparency": cfg.transparency,
                "intervention": cfg.intervention,
                "enable_cheap_talk": cfg.enable_cheap_talk,
                "thinking_enabled": cfg.thinking_enabled,
                "first_speaker": cfg.first_speaker,
                "theme_id": cfg.theme_id,
                "seed": cfg.seed,
                "agent_a": trace.agent_names[0],
                "agent_b": trace.agent_names[1],
                "cumulative_reward_a": trace.cumulative_rewards[0],
                "cumulative_reward_b": trace.cumulative_rewards[1],
            }
        )
        for record in trace.rounds:
            out = record.outcome
            rounds.append(
                {
                    "game_id": trace.game_id,
                    "round": record.round_number,
                    "scenario_id": record.scenario_id,
                    "annulled": out.annulled,
                    "reward_a": out.rewards[0],
                    "reward_b": out.rewards[1],
                    "joint_reward": out.joint_reward,
                    "efficiency": float(out.efficiency) if out.efficiency is not None else None,
                    "early_decision_a": record.early_decision[0],
                    "early_decision_b": record.early_decision[1],
                    "fallback": record.fallback,
                    "num_turns": len(record.turns),
                }
            )
            for turn in record.turns:
                turns.append(
                    {
                        "game_id": trace.game_id,
                        "round": record.round_number,
                        "turn_index": turn.turn_index,
                        "speaker": turn.speaker,
                        "phase": turn.phase,
                        "thinking": turn.thinking,
                        "speech": turn.speech,
                        "finalized": turn.action is not None,
                    }
                )
            for seat in (0, 1):
                decisions.append(
                    {
                        "game_id": trace.game_id,
                        "round": record.round_number,
                        "seat": seat,
                        "purchase": json.dumps(
                            record.decisions[seat].to_dict(), sort_keys=True
                        ),
                    }
                )
    for a in sorted(annotations, key=lambda a: (a.game_id, a.round_number)):
        for label, value in a.core_labels.items():
            labels.append(
                {
                    "game_id": a.game_id,
                    "round": a.round_number,
                    "label": label,
                    "value": value,
                    "agents": "",
                    "judge_binding": a.judge_binding,
                    "rubric_version": a.rubric_version,
                }
            )
        for tag, aux in a.auxiliary_tags.items():
            labels.append(
                {
                    "game_id": a.game_id,
                    "round": a.round_number,
                    "label": tag,
                    "value": aux.present,
                    "agents": ",".join(aux.agents),
                    "judge_binding": a.judge_binding,
                    "rubric_version": a.rubric_version,
                }
            )
    return {
        "games": games,
        "rounds": rounds,
        "turns": turns,
        "decisions": decisions,
        "labels": labels,
    }


def write_relational_csv(tables: Mapping[str, list[dict]], out_dir: Path | str) -> None:
    import csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in tables.items():
        path = out / f"{name}.csv"
        if not rows:
            path.write_text("")
            continue
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)


# --- experiment runs --------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRun:
    experiment_run_id: str
    grid: Mapping
    repetitions: int = 1
    created: str = ""
    status: Mapping[str, str] = field(default_factory=dict)  # game_id -> state

    def to_dict(self) -> dict:
        return {
            "experiment_run_id": self.experiment_run_id,
            "grid": dict(self.grid),
            "repetitions": self.repetitions,
            "created": self.created,
            "status": dict(self.status),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentRun":
        return cls(
            experiment_run_id=data["experiment_run_id"],
            grid=data["grid"],
            repetitions=data.get("repetitions", 1),
            created=data.get("created", ""),
            status=data.get("status", {}),
        )


def new_experiment_run(grid: Mapping, repetitions: int = 1) -> ExperimentRun:
    from datetime import datetime, timezone

    return ExperimentRun(
        experiment_run_id=str(uuid.uuid4()),
        grid=grid,
        repetitions=repetitions,
        created=datetime.now(timezone.utc).isoformat(),
    )


def grid_configs(run: ExperimentRun) -> list:
    """Expand a grid definition into role-swapped GameConfig pairs.

    Grid keys: scenario_ids (list of lists or list of ids), stabilities,
    rotations, interventions, transparencies, themes, plus scalar defaults.
    Each base cell is scheduled twice with first-speaker roles swapped.
    """
    from itertools import product

    from .engine import GameConfig, derive_game_id, pair_with_role_swap

    grid = run.grid
    scenario_sets = grid.get("scenario_ids", [])
    stabilities = grid.get("stabilities", ["stable"])
    rotations = grid.get("rotations", ["fixed"])
    interventions = grid.get("interventions", ["none"])
    transparencies = grid.get("transparencies", ["none"])
    themes = grid.get("themes", ["identity"])
    configs = []
    for rep, sids, stab, rot, interv, transp, theme in (
        (r, s, st, ro, iv, tp, th)
        for r, s, st, ro, iv, tp, th in product(
            range(run.repetitions),
            scenario_sets,
            stabilities,
            rotations,
            interventions,
            transparencies,
            themes,
        )
    ):
        if isinstance(sids, str):
            sids = [sids]
        base = GameConfig(
            scenario_ids=tuple(sids),
            num_rounds=grid.get("num_rounds", 4),
            cheap_talk_turns=grid.get("cheap_talk_turns", 5),
            partner_stability=stab,
            project_rotation=rot,
            intervention=interv,
            transparency=transp,
            enable_cheap_talk=grid.get("enable_cheap_talk", True),
            thinking_enabled=grid.get("thinking_enabled", True),
            theme_id=theme,
            seed=grid.get("seed", 0) + rep,
            experiment_run_id=run.experiment_run_id,
        )
        for cfg in pair_with_role_swap(base):
            configs.append(
                dataclasses.replace(cfg, game_id=derive_game_id(cfg))
            )
    return configs
