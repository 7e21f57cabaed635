"""Round-by-round behavioral labeling of game traces.

An LLM binding judges one whole game per call against a versioned rubric
(shipped as a data file); responses are parsed strictly, stored append-only,
and calibrated against human labels via Cohen's kappa.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .agents import ModelBinding, llm_chat
from .engine import GameTrace

CORE_LABELS = (
    "misaligned_mental_models",
    "agreement_abandonment",
    "coordination_withdrawal",
    "domain_specialization",
    "misalignment_recovery",
)

AUXILIARY_TAGS = (
    "voluntary_project_disclosure",
    "fairness_appeal",
    "threatening_language",
)

VALID_AGENTS = ("agent_a", "agent_b")

DEFAULT_RUBRIC_VERSION = "v3"


class JudgeParseError(ValueError):
    pass


def load_rubric(version: str = DEFAULT_RUBRIC_VERSION) -> str:
    path = Path(__file__).parent / "data" / f"judge_rubric_{version}.txt"
    if not path.exists():
        raise FileNotFoundError(f"no rubric file for version {version!r}")
    return path.read_text()


@dataclass(frozen=True)
class AuxTag:
    present: bool
    agents: tuple[str, ...]

    def __post_init__(self):
        if self.present and not self.agents:
            raise JudgeParseError("present tag must name at least one agent")
        if not self.present and self.agents:
            raise JudgeParseError("absent tag must have empty agents")
        bad = [a for a in self.agents if a not in VALID_AGENTS]
        if bad:
            raise JudgeParseError(f"invalid agent names: {bad}")
        # normalized order, no duplicates
        ordered = tuple(a for a in VALID_AGENTS if a in self.agents)
        object.__setattr__(self, "agents", ordered)

    def to_dict(self) -> dict:
        return {"present": self.present, "agents": list(self.agents)}


@dataclass(frozen=True)
class JudgeAnnotation:
    game_id: str
    round_number: int
    core_labels: Mapping[str, bool]
    auxiliary_tags: Mapping[str, AuxTag]
    judge_binding: str = ""
    rubric_version: str = DEFAULT_RUBRIC_VERSION

    def __post_init__(self):
        if set(self.core_labels) != set(CORE_LABELS):
            raise JudgeParseError(
                f"core labels must be exactly {CORE_LABELS}, got {sorted(self.core_labels)}"
            )
        if set(self.auxiliary_tags) != set(AUXILIARY_TAGS):
            raise JudgeParseError(
                f"auxiliary tags must be exactly {AUXILIARY_TAGS}, got {sorted(self.auxiliary_tags)}"
            )
        object.__setattr__(
            self, "core_labels", {k: bool(self.core_labels[k]) for k in CORE_LABELS}
        )
        object.__setattr__(
            self, "auxiliary_tags", {k: self.auxiliary_tags[k] for k in AUXILIARY_TAGS}
        )

    def to_dict(self) -> dict:
        return {
            "game_id": self.game_id,
            "round_number": self.round_number,
            "core_labels": dict(self.core_labels),
            "auxiliary_tags": {k: v.to_dict() for k, v in self.auxiliary_tags.items()},
            "judge_binding": self.judge_binding,
            "rubric_version": self.rubric_version,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "JudgeAnnotation":
        return cls(
            game_id=data["game_id"],
            round_number=data["round_number"],
            core_labels=data["core_labels"],
            auxiliary_tags={
                k: AuxTag(v["present"], tuple(v["agents"]))
                for k, v in data["auxiliary_tags"].items()
            },
            judge_binding=data.get("judge_binding", ""),
            rubric_version=data.get("rubric_version", DEFAULT_RUBRIC_VERSION),
        )


_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$")


def parse_judge_response(
    raw: str,
    game_id: str,
    expected_rounds: Sequence[int],
    judge_binding: str = "",
    rubric_version: str = DEFAULT_RUBRIC_VERSION,
) -> list[JudgeAnnotation]:
    """Strict parse of a whole-game judge reply; enforces round completeness."""
    text = _FENCE.sub("", raw.strip()).strip()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JudgeParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(payload, dict) or "rounds" not in payload:
        raise JudgeParseError('response must be an object with a "rounds" array')
    rows = payload["rounds"]
    if not isinstance(rows, list):
        raise JudgeParseError('"rounds" must be an array')
    annotations = []
    for row in rows:
        if not isinstance(row, dict):
            raise JudgeParseError("each round entry must be an object")
        try:
            tags = {
                k: AuxTag(bool(v["present"]), tuple(v.get("agents", [])))
                for k, v in row.get("auxiliary_tags", {}).items()
            }
        except (TypeError, KeyError) as exc:
            raise JudgeParseError(f"malformed auxiliary tag: {exc}") from exc
        annotations.append(
            JudgeAnnotation(
                game_id=game_id,
                round_number=row.get("round_number"),
                core_labels=row.get("core_labels", {}),
                auxiliary_tags=tags,
                judge_binding=judge_binding,
                rubric_version=rubric_version,
            )
        )
    got = sorted(a.round_number for a in annotations)
    expected = sorted(expected_rounds)
    if got != expected:
        raise JudgeParseError(f"rounds {got} do not cover expected {expected}")
    return annotations


def transcript_for_judge(trace: GameTrace, include_thinking: bool = True) -> str:
    """Chronological whole-game transcript with outcomes for the user message."""
    seat_name = {0: "agent_a", 1: "agent_b"}
    lines = [f"GAME {trace.game_id} ({len(trace.rounds)} rounds)"]
    for record in trace.rounds:
        lines.append(f"\n=== Round {record.round_number} ===")
        for turn in record.turns:
            who = seat_name[turn.speaker]
            if include_thinking and turn.thinking:
                lines.append(f"[{who} thinking] {turn.thinking}")
            lines.append(f"[{who} speech] {turn.speech}")
            if turn.action is not None:
                lines.append(f"[{who} finalizes] {json.dumps(turn.action.to_dict(), sort_keys=True)}")
        a, b = record.decisions
        lines.append(f"Final submissions: agent_a={json.dumps(a.to_dict(), sort_keys=True)} "
                     f"agent_b={json.dumps(b.to_dict(), sort_keys=True)}")
        out = record.outcome
        eff = f"{float(out.efficiency):.3f}" if out.efficiency is not None else "n/a"
        status = "ANNULLED (overdraw)" if out.annulled else "settled"
        lines.append(
            f"Outcome: {status}; rewards agent_a={out.rewards[0]}, "
            f"agent_b={out.rewards[1]}; joint={out.joint_reward}; efficiency={eff}"
        )
    return "\n".join(lines)


def judge_game(
    trace: GameTrace,
    binding: ModelBinding,
    rubric_version: str = DEFAULT_RUBRIC_VERSION,
    include_thinking: bool = True,
    transport: Optional[Callable] = None,
    max_retries: int = 3,
) -> Optional[list[JudgeAnnotation]]:
    """Judge one whole game. Returns None (unjudged) after retry exhaustion."""
    rubric = load_rubric(rubric_version)
    expected = [r.round_number for r in trace.rounds]
    messages = [
        {"role": "system", "content": rubric},
        {
            "role": "user",
            "content": transcript_for_judge(trace, include_thinking=include_thinking),
        },
    ]
    working = list(messages)
    for attempt in range(max_retries + 1):
        raw, _, _ = llm_chat(binding, working, transport=transport)
        try:
            return parse_judge_response(
                raw, trace.game_id, expected, binding.binding_id, rubric_version
            )
        except JudgeParseError as exc:
            if attempt == max_retries:
                return None
            working = messages + [
                {"role": "assistant", "content": raw},
                {
                    "role": "user",
                    "content": f"Your previous response was invalid: {exc}\n"
                    "Respond again with ONLY the JSON object, covering every round.",
                },
            ]
    return None


# --- prevalence and agreement ----------------------------------------------


def prevalence(
    annotations: Sequence[JudgeAnnotation],
    round_filter: Optional[Callable[[JudgeAnnotation], bool]] = None,
) -> dict:
    rows = [a for a in annotations if round_filter is None or round_filter(a)]
    if not rows:
        raise ValueError("empty round filter")
    n = len(rows)
    out: dict = {"rounds": n, "labels": {}}
    for label in CORE_LABELS:
        k = sum(a.core_labels[label] for a in rows)
        out["labels"][label] = {"numerator": k, "denominator": n, "value": k / n}
    for tag in AUXILIARY_TAGS:
        k = sum(a.auxiliary_tags[tag].present for a in rows)
        out["labels"][tag] = {"numerator": k, "denominator": n, "value": k / n}
    return out


def outcome_filter(traces: Sequence[GameTrace], which: str) -> Callable[[JudgeAnnotation], bool]:
    """Round filter over all/optimal/suboptimal/annulled outcome partitions."""
    table = {}
    for trace in traces:
        for record in trace.rounds:
            eff = record.outcome.efficiency
            table[(trace.game_id, record.round_number)] = (
                record.outcome.annulled,
                eff is not None and eff == 1,
            )

    def check(a: JudgeAnnotation) -> bool:
        annulled, optimal = table[(a.game_id, a.round_number)]
        if which == "all":
            return True
        if which == "optimal":
            return optimal
        if which == "suboptimal":
            return not optimal
        if which == "annulled":
            return annulled
        raise ValueError(f"unknown partition {which!r}")

    return check


def _label_value(annotation: JudgeAnnotation, label: str) -> bool:
    if label in CORE_LABELS:
        return annotation.core_labels[label]
    return annotation.auxiliary_tags[label].present


def cohen_kappa(
    annotations_a: Sequence[JudgeAnnotation],
    annotations_b: Sequence[JudgeAnnotation],
    label: str,
) -> Optional[float]:
    """Binary Cohen's kappa; None when chance agreement is 1 (both raters
    constant), mirroring the convention of reporting a dash."""
    key = lambda a: (a.game_id, a.round_number)
    by_a = {key(a): _label_value(a, label) for a in annotations_a}
    by_b = {key(b): _label_value(b, label) for b in annotations_b}
    if set(by_a) != set(by_b):
        raise ValueError("raters must cover identical (game, round) keys")
    if not by_a:
        raise ValueError("no rounds to compare")
    n = len(by_a)
    xs = [(by_a[k], by_b[k]) for k in by_a]
    p_o = sum(a == b for a, b in xs) / n
    pa = sum(a for a, _ in xs) / n
    pb = sum(b for _, b in xs) / n
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e == 1:
        return None
    return (p_o - p_e) / (1 - p_e)


# --- persistence ------------------------------------------------------------


def save_annotations(annotations: Sequence[JudgeAnnotation], path: Path | str) -> None:
    payload = {
        "game_id": annotations[0].game_id,
        "annotations": [a.to_dict() for a in annotations],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_annotations(path: Path | str) -> list[JudgeAnnotation]:
    data = json.loads(Path(path).read_text())
    return [JudgeAnnotation.from_dict(a) for a in data["annotations"]]
