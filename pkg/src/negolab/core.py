"""Core game types and round settlement.

Everything here is an immutable value with pure functions over it:
purchase validation, greedy run auto-assignment, reward computation,
and joint settlement (overdraw -> annulment). Currency arithmetic uses
exact rationals so budget boundary cases are bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence


class InfeasibleRunsError(ValueError):
    """Explicit run map exceeds the purchased resources (retriable decision error)."""


class DegenerateScenarioError(ValueError):
    """Scenario with C = 0: no agent can earn anything."""


def _as_fraction(value) -> Fraction:
    # Decimal-string round trip so JSON 1.5 means exactly 3/2, not a float artifact.
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class ResourceEnv:
    """Shared resource pool: per-round supply, unit costs, per-agent budget."""

    resource_ids: tuple[str, ...]
    supply: Mapping[str, int]
    unit_cost: Mapping[str, Fraction]
    budget: Fraction
    max_types: int

    def __post_init__(self):
        object.__setattr__(self, "supply", dict(self.supply))
        object.__setattr__(
            self, "unit_cost", {r: _as_fraction(c) for r, c in self.unit_cost.items()}
        )
        object.__setattr__(self, "budget", _as_fraction(self.budget))
        for r in self.resource_ids:
            if r not in self.supply or r not in self.unit_cost:
                raise ValueError(f"resource {r} missing supply or cost")
        if any(self.supply[r] < 1 for r in self.resource_ids):
            raise ValueError("all supplies must be >= 1")
        if any(self.unit_cost[r] <= 0 for r in self.resource_ids):
            raise ValueError("all unit costs must be > 0")
        if self.budget <= 0:
            raise ValueError("budget must be > 0")
        if self.max_types < 1:
            raise ValueError("max_types must be >= 1")

    def cost_of(self, quantities: Mapping[str, int]) -> Fraction:
        return sum(
            (q * self.unit_cost[r] for r, q in quantities.items() if r in self.unit_cost),
            Fraction(0),
        )

    def to_dict(self) -> dict:
        return {
            "supply": dict(self.supply),
            "costs": {r: float(c) for r, c in self.unit_cost.items()},
            "budget": float(self.budget),
            "max_types": self.max_types,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ResourceEnv":
        return cls(
            resource_ids=tuple(data["supply"].keys()),
            supply={r: int(v) for r, v in data["supply"].items()},
            unit_cost={r: _as_fraction(v) for r, v in data["costs"].items()},
            budget=_as_fraction(data["budget"]),
            max_types=int(data["max_types"]),
        )


#: The common environment shared by the published scenario pool.
DEFAULT_ENV = ResourceEnv(
    resource_ids=("r1", "r2", "r3"),
    supply={"r1": 10, "r2": 10, "r3": 6},
    unit_cost={"r1": Fraction(1), "r2": Fraction(3, 2), "r3": Fraction(3)},
    budget=Fraction(18),
    max_types=2,
)


@dataclass(frozen=True)
class Project:
    """A private combinatorial goal: resource mix per run -> reward per run."""

    name: str
    requirements: Mapping[str, int]
    reward: int

    def __post_init__(self):
        object.__setattr__(self, "requirements", dict(self.requirements))
        if not self.requirements:
            raise ValueError(f"project {self.name}: requirements must be nonempty")
        if any(q < 1 for q in self.requirements.values()):
            raise ValueError(f"project {self.name}: all requirement quantities must be >= 1")
        if self.reward < 1:
            raise ValueError(f"project {self.name}: reward must be >= 1")

    def run_cost(self, env: ResourceEnv) -> Fraction:
        return env.cost_of(self.requirements)

    def to_dict(self) -> dict:
        return {"name": self.name, "requirements": dict(self.requirements), "reward": self.reward}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Project":
        return cls(
            name=data["name"],
            requirements={r: int(v) for r, v in data["requirements"].items()},
            reward=int(data["reward"]),
        )


@dataclass(frozen=True)
class OracleAnnotation:
    """Exhaustively computed optima attached to a scenario."""

    v1: int
    v2: int
    m: int
    optimal_joint_allocations: tuple[tuple["Purchase", "Purchase", int, int], ...] = ()

    @property
    def c(self) -> int:
        return self.v1 + self.v2

    @property
    def mc_ratio(self) -> Fraction:
        if self.c == 0:
            raise DegenerateScenarioError("C = 0: compatibility ratio undefined")
        return Fraction(self.m, self.c)

    def to_dict(self) -> dict:
        return {
            "v1": self.v1,
            "v2": self.v2,
            "m": self.m,
            "mc_ratio": float(self.mc_ratio) if self.c else None,
            "optimal_joint_allocations": [
                {
                    "purchase_a": a.to_dict(),
                    "purchase_b": b.to_dict(),
                    "reward_a": ra,
                    "reward_b": rb,
                }
                for a, b, ra, rb in self.optimal_joint_allocations
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "OracleAnnotation":
        return cls(
            v1=int(data["v1"]),
            v2=int(data["v2"]),
            m=int(data["m"]),
            optimal_joint_allocations=tuple(
                (
                    Purchase.from_dict(w["purchase_a"]),
                    Purchase.from_dict(w["purchase_b"]),
                    int(w["reward_a"]),
                    int(w["reward_b"]),
                )
                for w in data.get("optimal_joint_allocations", [])
            ),
        )


@dataclass(frozen=True)
class Scenario:
    """Environment plus two agents' project lists; presentation order matters."""

    scenario_id: str
    env: ResourceEnv
    agent_projects: tuple[tuple[Project, ...], tuple[Project, ...]]
    oracle: Optional[OracleAnnotation] = None

    def __post_init__(self):
        if len(self.agent_projects) != 2:
            raise ValueError("scenario must have exactly two agent slots")
        for projects in self.agent_projects:
            if not projects:
                raise ValueError("each agent needs at least one project")
            names = [p.name for p in projects]
            if len(names) != len(set(names)):
                raise ValueError("project names must be unique within an agent")

    def projects_for(self, agent_index: int) -> tuple[Project, ...]:
        return self.agent_projects[agent_index]

    def with_oracle(self, oracle: OracleAnnotation) -> "Scenario":
        return Scenario(self.scenario_id, self.env, self.agent_projects, oracle)

    def swapped(self) -> "Scenario":
        swapped_oracle = None
        if self.oracle is not None:
            swapped_oracle = OracleAnnotation(
                v1=self.oracle.v2,
                v2=self.oracle.v1,
                m=self.oracle.m,
                optimal_joint_allocations=tuple(
                    (b, a, rb, ra) for a, b, ra, rb in self.oracle.optimal_joint_allocations
                ),
            )
        return Scenario(
            self.scenario_id,
            self.env,
            (self.agent_projects[1], self.agent_projects[0]),
            swapped_oracle,
        )

    def to_dict(self) -> dict:
        doc = {
            "scenario_id": self.scenario_id,
            "env": self.env.to_dict(),
            "agents": [
                {"projects": [p.to_dict() for p in projects]}
                for projects in self.agent_projects
            ],
        }
        if self.oracle is not None:
            doc["oracle"] = self.oracle.to_dict()
        return doc

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scenario":
        env = ResourceEnv.from_dict(data["env"])
        agents = tuple(
            tuple(Project.from_dict(p) for p in slot["projects"]) for slot in data["agents"]
        )
        oracle = OracleAnnotation.from_dict(data["oracle"]) if data.get("oracle") else None
        scenario = cls(data["scenario_id"], env, agents, oracle)
        for projects in agents:
            for p in projects:
                if p.run_cost(env) > env.budget:
                    raise ValueError(
                        f"{data['scenario_id']}: project {p.name} unaffordable "
                        f"({float(p.run_cost(env))} > {float(env.budget)})"
                    )
        return scenario

    @classmethod
    def load(cls, path: Path | str) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: Path | str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class Purchase:
    """Per-resource units requested, optionally with an explicit project-run map."""

    quantities: Mapping[str, int] = field(default_factory=dict)
    runs: Optional[Mapping[str, int]] = None

    def __post_init__(self):
        # Canonical form: zero quantities dropped so equality means the same demand.
        object.__setattr__(
            self, "quantities", {r: int(q) for r, q in self.quantities.items() if q}
        )
        if self.runs is not None:
            object.__setattr__(self, "runs", {p: int(n) for p, n in self.runs.items()})

    def quantity(self, resource_id: str) -> int:
        return self.quantities.get(resource_id, 0)

    @property
    def type_count(self) -> int:
        return len(self.quantities)

    def to_dict(self) -> dict:
        doc: dict = dict(sorted(self.quantities.items()))
        if self.runs is not None:
            doc["projects"] = dict(sorted(self.runs.items()))
        return doc

    @classmethod
    def from_dict(cls, data: Mapping) -> "Purchase":
        runs = data.get("projects")
        quantities = {k: v for k, v in data.items() if k != "projects"}
        return cls(quantities=quantities, runs=runs)


@dataclass(frozen=True)
class RoundOutcome:
    annulled: bool
    rewards: tuple[int, int]
    realized_runs: tuple[Mapping[str, int], Mapping[str, int]]
    joint_reward: int
    efficiency: Optional[Fraction]

    def to_dict(self) -> dict:
        return {
            "annulled": self.annulled,
            "rewards": list(self.rewards),
            "realized_runs": [dict(r) for r in self.realized_runs],
            "joint_reward": self.joint_reward,
            "efficiency": float(self.efficiency) if self.efficiency is not None else None,
        }


def validate_purchase(
    purchase: Purchase, env: ResourceEnv, projects: Sequence[Project]
) -> list[str]:
    """Return every violated constraint; empty list means the purchase is valid.

    Violations are data, not faults: an over-budget request from an agent is a
    retriable decision error, not an engine crash.
    """
    violations: list[str] = []
    known = set(env.resource_ids)
    for r, q in purchase.quantities.items():
        if r not in known:
            violations.append(f"unknown resource '{r}'")
        if not isinstance(q, int) or isinstance(q, bool):
            violations.append(f"quantity for '{r}' must be an integer, got {q!r}")
        elif q < 0:
            violations.append(f"quantity for '{r}' must be nonnegative, got {q}")
    if not violations:
        cost = env.cost_of(purchase.quantities)
        if cost > env.budget:
            violations.append(
                f"total cost {float(cost)} exceeds budget {float(env.budget)}"
            )
    if purchase.type_count > env.max_types:
        violations.append(f"type count {purchase.type_count} > {env.max_types}")
    if purchase.runs is not None:
        by_name = {p.name: p for p in projects}
        for name, count in purchase.runs.items():
            if name not in by_name:
                violations.append(f"unknown project '{name}'")
            elif not isinstance(count, int) or isinstance(count, bool) or count < 0:
                violations.append(f"run count for '{name}' must be a nonnegative integer")
        if not violations:
            for r in env.resource_ids:
                needed = sum(
                    by_name[name].requirements.get(r, 0) * count
                    for name, count in purchase.runs.items()
                )
                if needed > purchase.quantity(r):
                    violations.append(
                        f"runs need {needed} of {r} but only {purchase.quantity(r)} purchased"
                    )
    return violations


def auto_assign_runs(
    quantities: Mapping[str, int], projects: Sequence[Project]
) -> dict[str, int]:
    """Greedy assignment in presentation order: max out project 1, then 2 on the rest."""
    remaining = {r: q for r, q in quantities.items() if q > 0}
    runs: dict[str, int] = {}
    for project in projects:
        possible = min(
            (remaining.get(r, 0) // n for r, n in project.requirements.items()),
            default=0,
        )
        runs[project.name] = possible
        for r, n in project.requirements.items():
            if possible:
                remaining[r] = remaining.get(r, 0) - n * possible
    return runs


def compute_reward(
    purchase: Purchase, projects: Sequence[Project]
) -> tuple[int, dict[str, int]]:
    """Reward for one agent's purchase: explicit runs verbatim, else greedy auto-assign.

    Zero completed runs is a zero reward, not an annulment. An explicit run map
    that exceeds the purchased resources is a malformed decision and raises.
    """
    if purchase.runs is not None:
        by_name = {p.name: p for p in projects}
        for r in {res for p in projects for res in p.requirements}:
            needed = sum(
                by_name[name].requirements.get(r, 0) * count
                for name, count in purchase.runs.items()
                if name in by_name
            )
            if needed > purchase.quantity(r):
                raise InfeasibleRunsError("runs exceed purchased resources")
        runs = {p.name: purchase.runs.get(p.name, 0) for p in projects}
    else:
        runs = auto_assign_runs(purchase.quantities, projects)
    by_name = {p.name: p for p in projects}
    reward = sum(by_name[name].reward * count for name, count in runs.items())
    return reward, runs


def settle_round(
    purchase_a: Purchase, purchase_b: Purchase, scenario: Scenario
) -> RoundOutcome:
    """Resolve simultaneous decisions: overdraw check, then per-agent rewards."""
    env = scenario.env
    overdrawn = any(
        purchase_a.quantity(r) + purchase_b.quantity(r) > env.supply[r]
        for r in env.resource_ids
    )
    m = scenario.oracle.m if scenario.oracle is not None else None
    if overdrawn:
        efficiency = Fraction(0) if m else None
        return RoundOutcome(
            annulled=True,
            rewards=(0, 0),
            realized_runs=({}, {}),
            joint_reward=0,
            efficiency=efficiency,
        )
    reward_a, runs_a = compute_reward(purchase_a, scenario.agent_projects[0])
    reward_b, runs_b = compute_reward(purchase_b, scenario.agent_projects[1])
    joint = reward_a + reward_b
    efficiency = Fraction(joint, m) if m else None
    return RoundOutcome(
        annulled=False,
        rewards=(reward_a, reward_b),
        realized_runs=(runs_a, runs_b),
        joint_reward=joint,
        efficiency=efficiency,
    )


def builtin_scenario_dir() -> Path:
    return Path(__file__).parent / "data" / "scenarios"


def load_builtin_scenarios() -> dict[str, Scenario]:
    """The published 15-scenario pool shipped as fixture files."""
    out: dict[str, Scenario] = {}
    for path in sorted(builtin_scenario_dir().glob("*.json")):
        scenario = Scenario.load(path)
        out[scenario.scenario_id] = scenario
    return out
