"""Scenario generation by simulated annealing, plus thematic renaming.

The annealer perturbs project requirements, rewards, and agent assignment
to hit a target compatibility ratio while enforcing equal individual
maxima, swap fairness, solution multiplicity, and per-project
affordability. Every loss evaluation is one exact oracle solve.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .core import DEFAULT_ENV, OracleAnnotation, Project, ResourceEnv, Scenario
from . import oracle

MIN_QUANTITY, MAX_QUANTITY = 1, 6
MIN_REWARD, MAX_REWARD = 1, 10
MAX_TYPES_PER_PROJECT = 2


class ForgeError(RuntimeError):
    """Iteration budget exhausted; carries the best scenario found and its loss."""

    def __init__(self, message: str, best: Scenario, loss: "ForgeLoss"):
        super().__init__(message)
        self.best = best
        self.loss = loss


@dataclass(frozen=True)
class ForgeTarget:
    target_ratio: Fraction
    tolerance: Fraction = Fraction(1, 20)
    projects_per_agent: int = 3
    env: ResourceEnv = DEFAULT_ENV

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        # Equal maxima force M >= max(V1, V2) = C/2, so targets below 0.5 are unreachable.
        if self.target_ratio < Fraction(1, 2) or self.target_ratio > 1:
            raise ValueError("target_ratio must lie in [0.5, 1.0] under equal maxima")


@dataclass(frozen=True)
class ForgeLoss:
    """Weighted composite loss; all acceptance terms must be zero except ratio_error."""

    ratio_error: float
    imbalance: int
    swap_unfairness: int
    multiplicity_deficit: int
    unaffordability: int
    weights: tuple[float, float, float, float, float] = (10.0, 1.0, 2.0, 1.0, 5.0)

    @property
    def total(self) -> float:
        w = self.weights
        return (
            w[0] * self.ratio_error
            + w[1] * self.imbalance
            + w[2] * self.swap_unfairness
            + w[3] * self.multiplicity_deficit
            + w[4] * self.unaffordability
        )

    def accepted(self, tolerance: Fraction) -> bool:
        return (
            self.ratio_error <= float(tolerance)
            and self.imbalance == 0
            and self.swap_unfairness == 0
            and self.multiplicity_deficit == 0
            and self.unaffordability == 0
        )


def evaluate_loss(
    scenario: Scenario, target: ForgeTarget, annotation: Optional[OracleAnnotation] = None
) -> ForgeLoss:
    ann = annotation if annotation is not None else oracle.solve(scenario)
    if ann.c == 0:
        ratio_error = 1.0
    else:
        ratio_error = abs(float(ann.mc_ratio - target.target_ratio))
    pairs = ann.optimal_joint_allocations
    favors_a = any(ra >= rb for _, _, ra, rb in pairs)
    favors_b = any(rb >= ra for _, _, ra, rb in pairs)
    distinct = {(tuple(sorted(a.quantities.items())), tuple(sorted(b.quantities.items())))
                for a, b, _, _ in pairs}
    unaffordable = sum(
        1
        for projects in scenario.agent_projects
        for p in projects
        if p.run_cost(scenario.env) > scenario.env.budget
    )
    return ForgeLoss(
        ratio_error=ratio_error,
        imbalance=abs(ann.v1 - ann.v2),
        swap_unfairness=0 if (favors_a and favors_b) else 1,
        multiplicity_deficit=0 if len(distinct) >= 2 else 1,
        unaffordability=unaffordable,
    )


def _random_project(name: str, env: ResourceEnv, rng: random.Random) -> Project:
    # Resample until one run fits the budget; keeps the initial loss landscape sane.
    while True:
        n_types = rng.randint(1, min(MAX_TYPES_PER_PROJECT, len(env.resource_ids)))
        resources = rng.sample(list(env.resource_ids), n_types)
        requirements = {r: rng.randint(MIN_QUANTITY, MAX_QUANTITY) for r in resources}
        project = Project(name, requirements, rng.randint(MIN_REWARD, MAX_REWARD))
        if project.run_cost(env) <= env.budget:
            return project


def random_scenario(
    scenario_id: str, target: ForgeTarget, rng: random.Random
) -> Scenario:
    names = [f"project_{chr(ord('a') + i)}" for i in range(target.projects_per_agent)]
    agents = tuple(
        tuple(_random_project(name, target.env, rng) for name in names) for _ in range(2)
    )
    return Scenario(scenario_id, target.env, agents)


def perturb(scenario: Scenario, rng: random.Random) -> Scenario:
    """Apply exactly one valid move; invalid draws are resampled."""
    env = scenario.env
    while True:
        move = rng.choice(("bump_requirement", "toggle_resource", "bump_reward", "swap_project"))
        agent = rng.randrange(2)
        projects = list(scenario.agent_projects[agent])
        idx = rng.randrange(len(projects))
        project = projects[idx]

        if move == "bump_requirement":
            resource = rng.choice(list(project.requirements))
            delta = rng.choice((-1, 1))
            new_q = project.requirements[resource] + delta
            if not MIN_QUANTITY <= new_q <= MAX_QUANTITY:
                continue
            requirements = dict(project.requirements)
            requirements[resource] = new_q
            projects[idx] = Project(project.name, requirements, project.reward)

        elif move == "toggle_resource":
            if rng.random() < 0.5 and len(project.requirements) < MAX_TYPES_PER_PROJECT:
                absent = [r for r in env.resource_ids if r not in project.requirements]
                if not absent:
                    continue
                requirements = dict(project.requirements)
                requirements[rng.choice(absent)] = rng.randint(MIN_QUANTITY, MAX_QUANTITY)
            elif len(project.requirements) > 1:
                requirements = dict(project.requirements)
                del requirements[rng.choice(list(requirements))]
            else:
                continue
            projects[idx] = Project(project.name, requirements, project.reward)

        elif move == "bump_reward":
            new_reward = project.reward + rng.choice((-1, 1))
            if not MIN_REWARD <= new_reward <= MAX_REWARD:
                continue
            projects[idx] = Project(project.name, project.requirements, new_reward)

        else:  # swap_project: exchange payloads across agents, names stay positional
            other = list(scenario.agent_projects[1 - agent])
            jdx = rng.randrange(len(other))
            mine, theirs = projects[idx], other[jdx]
            projects[idx] = Project(mine.name, theirs.requirements, theirs.reward)
            other[jdx] = Project(theirs.name, mine.requirements, mine.reward)
            slots = [list(scenario.agent_projects[0]), list(scenario.agent_projects[1])]
            slots[agent] = projects
            slots[1 - agent] = other
            return Scenario(scenario.scenario_id, env, (tuple(slots[0]), tuple(slots[1])))

        slots = [list(scenario.agent_projects[0]), list(scenario.agent_projects[1])]
        slots[agent] = projects
        return Scenario(scenario.scenario_id, env, (tuple(slots[0]), tuple(slots[1])))


def anneal_step(
    current: tuple[Scenario, ForgeLoss],
    temperature: float,
    rng: random.Random,
    target: ForgeTarget,
) -> tuple[Scenario, ForgeLoss]:
    """One Metropolis step: accept improvements always, worsenings with exp(-d/T)."""
    scenario, loss = current
    candidate = perturb(scenario, rng)
    candidate_loss = evaluate_loss(candidate, target)
    delta = candidate_loss.total - loss.total
    if delta <= 0 or rng.random() < math.exp(-delta / max(temperature, 1e-12)):
        return candidate, candidate_loss
    return scenario, loss


@dataclass(frozen=True)
class ForgeSchedule:
    initial_temperature: float = 1.0
    cooling: float = 0.995
    steps_per_restart: int = 20_000
    max_restarts: int = 10


def forge_scenario(
    target: ForgeTarget,
    seed: int,
    scenario_id: Optional[str] = None,
    schedule: ForgeSchedule = ForgeSchedule(),
) -> Scenario:
    """Anneal until the acceptance predicate holds; deterministic given (target, seed)."""
    if scenario_id is None:
        scenario_id = f"forged_t{float(target.target_ratio):.2f}_s{seed}"
    best: Optional[tuple[Scenario, ForgeLoss]] = None
    for restart in range(schedule.max_restarts):
        rng = random.Random(f"{seed}:{restart}")
        scenario = random_scenario(scenario_id, target, rng)
        loss = evaluate_loss(scenario, target)
        temperature = schedule.initial_temperature
        for _ in range(schedule.steps_per_restart):
            if loss.accepted(target.tolerance):
                return scenario.with_oracle(oracle.solve(scenario))
            scenario, loss = anneal_step((scenario, loss), temperature, rng, target)
            temperature *= schedule.cooling
        if loss.accepted(target.tolerance):
            return scenario.with_oracle(oracle.solve(scenario))
        if best is None or loss.total < best[1].total:
            best = (scenario, loss)
    raise ForgeError(
        f"no acceptable scenario within {schedule.max_restarts} restarts", best[0], best[1]
    )


# --- themes -----------------------------------------------------------------


@dataclass(frozen=True)
class Theme:
    theme_id: str
    resource_names: dict[str, str]

    def __post_init__(self):
        names = list(self.resource_names.values())
        if len(names) != len(set(names)):
            raise ValueError(f"theme {self.theme_id}: resource names must be injective")

    def display(self, resource_id: str) -> str:
        return self.resource_names[resource_id]


IDENTITY_THEME = Theme("identity", {r: r for r in DEFAULT_ENV.resource_ids})


def load_themes() -> dict[str, Theme]:
    path = Path(__file__).parent / "data" / "themes.json"
    with open(path) as fh:
        raw = json.load(fh)
    return {tid: Theme(tid, names) for tid, names in raw.items()}


@dataclass(frozen=True)
class ThemedScenario:
    """Prompt-facing view: resources renamed, internals untouched.

    Project names remain abstract regardless of theme.
    """

    scenario: Scenario
    theme: Theme

    def __post_init__(self):
        missing = [
            r for r in self.scenario.env.resource_ids if r not in self.theme.resource_names
        ]
        if missing:
            raise ValueError(f"theme {self.theme.theme_id} does not cover {missing}")

    def resource_name(self, resource_id: str) -> str:
        return self.theme.display(resource_id)

    def abstract_id(self, themed_name: str) -> Optional[str]:
        for rid, name in self.theme.resource_names.items():
            if name == themed_name:
                return rid
        return None

    def themed_quantities(self, quantities) -> dict[str, int]:
        return {self.resource_name(r): q for r, q in quantities.items()}

    def parse_quantities(self, themed: dict[str, int]) -> dict[str, int]:
        """Map themed names back to abstract ids; unknown names pass through."""
        out = {}
        for name, q in themed.items():
            rid = self.abstract_id(name)
            out[rid if rid is not None else name] = q
        return out


def apply_theme(scenario: Scenario, theme: Theme) -> ThemedScenario:
    return ThemedScenario(scenario, theme)
