"""Prompt assembly from the template catalog.

Templates live as data files under data/prompts/, keyed by phase. Rendering
substitutes only known {placeholder} tokens, so literal JSON braces in the
templates survive untouched. All prompt-facing resource names go through the
active theme; project names stay abstract.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

from .core import Project, Purchase, ResourceEnv, RoundOutcome
from .forge import ThemedScenario

_PROMPT_DIR = Path(__file__).parent / "data" / "prompts"
_TOKEN = re.compile(r"\{(\w+)\}")


@lru_cache(maxsize=None)
def template(name: str) -> str:
    return (_PROMPT_DIR / f"{name}.txt").read_text().rstrip("\n")


def render(name: str, **values) -> str:
    def sub(match: re.Match) -> str:
        key = match.group(1)
        return str(values[key]) if key in values else match.group(0)

    return _TOKEN.sub(sub, template(name))


def _money(value: Fraction) -> str:
    return str(int(value)) if value.denominator == 1 else str(float(value))


def _cost_value(value: Fraction) -> object:
    return int(value) if value.denominator == 1 else float(value)


def format_quantities(themed: ThemedScenario, quantities) -> str:
    env = themed.scenario.env
    ordered = {
        themed.resource_name(r): quantities.get(r, 0)
        for r in env.resource_ids
        if quantities.get(r, 0)
    }
    return json.dumps(ordered)


def format_runs(runs) -> str:
    positive = {name: n for name, n in runs.items() if n}
    if not positive:
        return "none"
    return ", ".join(f"{name}: {n}" for name, n in positive.items())


def project_lines(
    themed: ThemedScenario, projects: Sequence[Project], include_rewards: bool = True
) -> str:
    lines = []
    for p in projects:
        reqs = ", ".join(
            f"{themed.resource_name(r)}×{n}" for r, n in p.requirements.items()
        )
        if include_rewards:
            lines.append(f"  - {p.name}: requires [{reqs}], reward = {p.reward}/run")
        else:
            lines.append(f"  - {p.name}: requires [{reqs}]")
    return "\n".join(lines)


def decision_example(themed: ThemedScenario, projects: Sequence[Project]) -> str:
    env = themed.scenario.env
    resources = [themed.resource_name(r) for r in env.resource_ids[:2]]
    names = [p.name for p in projects[:2]]
    example: dict = {resources[0]: 3}
    if len(resources) > 1:
        example[resources[-1]] = 1
    example["projects"] = {n: i + 1 for i, n in enumerate(names)}
    return json.dumps(example)


def build_system_prompt(
    seat_index: int,
    themed: ThemedScenario,
    *,
    thinking_enabled: bool = True,
    partner_stability: str = "stable",
    transparency: str = "none",
    intervention: str = "none",
    single_round_view: bool = False,
    provider_json_suffix: bool = False,
) -> str:
    """Full system prompt: rules, projects, decision format, response format, situation."""
    env = themed.scenario.env
    own = themed.scenario.projects_for(seat_index)
    opponent = themed.scenario.projects_for(1 - seat_index)
    names = [themed.resource_name(r) for r in env.resource_ids]

    rules = render(
        "system_game_rules_single_round" if single_round_view else "system_game_rules",
        resource_types=", ".join(names),
        resource_supply=json.dumps(
            {themed.resource_name(r): env.supply[r] for r in env.resource_ids}
        ),
        resource_costs=json.dumps(
            {themed.resource_name(r): _cost_value(env.unit_cost[r]) for r in env.resource_ids}
        ),
        agent_budget=_money(env.budget),
        max_types=env.max_types,
    )

    projects = render(
        "system_projects",
        num_projects=len(own),
        projects_info=project_lines(themed, own),
    )
    if transparency == "requirements":
        projects += "\n" + render(
            "system_opponent_projects_requirements",
            opponent_projects_info=project_lines(themed, opponent, include_rewards=False),
        )
    elif transparency == "requirements_and_rewards":
        projects += "\n" + render(
            "system_opponent_projects_full",
            opponent_projects_info=project_lines(themed, opponent),
        )

    decision_fmt = render(
        "system_decision_format", decision_example=decision_example(themed, own)
    )

    if thinking_enabled:
        ids = env.resource_ids
        response_fmt = render(
            "system_response_format_thinking",
            example_resource_1=names[0],
            example_resource_2=names[min(1, len(names) - 1)],
            example_resource_3=names[-1],
            example_project_1=own[0].name,
            example_project_2=own[min(1, len(own) - 1)].name,
        )
    else:
        response_fmt = render(
            "system_response_format_no_thinking",
            decision_example=decision_example(themed, own),
        )

    if single_round_view:
        situation = template("system_situation_single_round")
    elif partner_stability == "shifting":
        situation = template("system_situation_shifting")
    else:
        situation = template("system_situation_stable")
    if intervention == "share_projects":
        situation += "\n\n" + template("intervention_share_projects")
    elif intervention == "theory_of_mind":
        situation += "\n\n" + template("intervention_theory_of_mind")

    sections = [rules, projects, decision_fmt, response_fmt, situation]
    if provider_json_suffix and thinking_enabled:
        sections.append(template("anthropic_json_suffix"))
    return "\n\n".join(sections)


def turns_info(cheap_talk_turns: int) -> str:
    if cheap_talk_turns == 0:
        return "as much as required"
    return f"up to {cheap_talk_turns} exchanges this round"


def cheap_talk_prompt(
    round_number: int,
    num_rounds: int,
    cheap_talk_turns: int,
    *,
    thinking_enabled: bool = True,
    opponent_message: Optional[str] = None,
    rotation_notice: Optional[str] = None,
    tom_reminder: bool = False,
) -> str:
    """Turn-0 cheap talk prompt for one seat."""
    name = "cheap_talk_initial" if thinking_enabled else "cheap_talk_initial_no_thinking"
    text = render(
        name,
        round_number=round_number,
        num_rounds=num_rounds,
        turns_info=turns_info(cheap_talk_turns),
    )
    if rotation_notice:
        text = rotation_notice + "\n\n" + text
    if opponent_message is not None:
        text += "\n\n" + render("cheap_talk_opponent_said", opponent_message=opponent_message)
    if tom_reminder:
        text += "\n\n" + template("tom_turn0_reminder")
    return text


def followup_prompt(opponent_message: str, thinking_enabled: bool = True) -> str:
    name = "cheap_talk_followup" if thinking_enabled else "cheap_talk_followup_no_thinking"
    return render(name, opponent_message=opponent_message)


def rotation_notice(themed: ThemedScenario, seat_index: int) -> str:
    return render(
        "rotation_notice",
        projects_info=project_lines(themed, themed.scenario.projects_for(seat_index)),
    )


def decision_prompt(
    env: ResourceEnv,
    *,
    thinking_enabled: bool = True,
    preamble: Optional[str] = None,
) -> str:
    name = "decision" if thinking_enabled else "decision_no_thinking"
    text = render(name, max_types=env.max_types, budget=_money(env.budget))
    if preamble:
        text = preamble + "\n\n" + text
    return text


def round_result_message(
    outcome: RoundOutcome,
    seat_index: int,
    own_decision: Purchase,
    opponent_decision: Purchase,
    themed: ThemedScenario,
) -> str:
    """Pick the standard / annulled / no-viable-runs template and fill it."""
    own_alloc = format_quantities(themed, own_decision.quantities)
    opp_alloc = format_quantities(themed, opponent_decision.quantities)
    if outcome.annulled:
        return render(
            "round_result_annulled", own_allocation=own_alloc, opponent_allocation=opp_alloc
        )
    own_reward = outcome.rewards[seat_index]
    if own_reward == 0:
        return render(
            "round_result_noviable", own_allocation=own_alloc, opponent_allocation=opp_alloc
        )
    return render(
        "round_result_standard",
        own_allocation=own_alloc,
        project_runs=format_runs(outcome.realized_runs[seat_index]),
        own_reward=own_reward,
        opponent_allocation=opp_alloc,
    )


def reflection_prompt(
    total_rounds: int,
    own_cumulative: int,
    opponent_cumulative: int,
    theoretical_max: int,
) -> str:
    joint = own_cumulative + opponent_cumulative
    pct = 100.0 * joint / theoretical_max if theoretical_max else 0.0
    return render(
        "reflection",
        total_rounds=total_rounds,
        own_cumulative_reward=own_cumulative,
        opponent_cumulative_reward=opponent_cumulative,
        joint_actual=joint,
        theoretical_max=theoretical_max,
        efficiency_pct=f"{pct:.1f}",
    )
