"""Independent reference solver used as an oracle for the main solver's tests.

Deliberately written with a different algorithm (pure-Python recursive
enumeration over quantity vectors, no numpy, no shared code paths beyond the
domain dataclasses) so agreement between the two implementations is evidence,
not tautology.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from negolab.core import Project, ResourceEnv, Scenario


def enumerate_quantity_vectors(env: ResourceEnv) -> list[dict[str, int]]:
    """Every purchase quantity vector satisfying supply, budget, and the
    resource-type cap, by plain recursion over resources."""
    resources = list(env.resource_ids)
    out: list[dict[str, int]] = []

    def recurse(idx: int, current: dict[str, int], cost: Fraction) -> None:
        if idx == len(resources):
            if sum(1 for q in current.values() if q > 0) <= env.max_types:
                out.append({r: q for r, q in current.items() if q > 0})
            return
        r = resources[idx]
        for q in range(env.supply[r] + 1):
            new_cost = cost + env.unit_cost[r] * q
            if new_cost > env.budget:
                break
            current[r] = q
            recurse(idx + 1, current, new_cost)
        current.pop(r, None)

    recurse(0, {}, Fraction(0))
    # dedupe (zero-dropped vectors can collide) while keeping determinism
    seen = set()
    unique = []
    for vec in out:
        key = tuple(sorted(vec.items()))
        if key not in seen:
            seen.add(key)
            unique.append(vec)
    return unique


def best_reward(quantities: dict[str, int], projects: tuple[Project, ...]) -> int:
    """Best achievable reward for a fixed purchase, by recursive run search."""
    projects = list(projects)

    def recurse(idx: int, remaining: dict[str, int]) -> int:
        if idx == len(projects):
            return 0
        p = projects[idx]
        max_runs = min(
            (remaining.get(r, 0) // n for r, n in p.requirements.items()),
            default=0,
        )
        best = 0
        for runs in range(max_runs + 1):
            nxt = dict(remaining)
            for r, n in p.requirements.items():
                nxt[r] = nxt.get(r, 0) - n * runs
            best = max(best, p.reward * runs + recurse(idx + 1, nxt))
        return best

    return recurse(0, dict(quantities))


def individual_max(seat: int, scenario: Scenario) -> int:
    env = scenario.env
    return max(
        best_reward(vec, scenario.projects_for(seat))
        for vec in enumerate_quantity_vectors(env)
    )


def joint_max(scenario: Scenario) -> int:
    env = scenario.env
    vectors = enumerate_quantity_vectors(env)
    rewards = [
        (
            best_reward(vec, scenario.projects_for(0)),
            best_reward(vec, scenario.projects_for(1)),
        )
        for vec in vectors
    ]
    best = 0
    for i, a in enumerate(vectors):
        for j, b in enumerate(vectors):
            if any(
                a.get(r, 0) + b.get(r, 0) > env.supply[r] for r in env.resource_ids
            ):
                continue
            best = max(best, rewards[i][0] + rewards[j][1])
    return best


def compatibility(scenario: Scenario) -> Fraction:
    c = individual_max(0, scenario) + individual_max(1, scenario)
    return Fraction(joint_max(scenario), c)
