"""Exact oracle: individual optima V1/V2, joint optimum M, and M/C.

Pure brute force over the filtered purchase space. The space is small by
construction (hundreds of purchases for the default environment), so the
joint sweep is a dense matrix of table lookups. No pruning beyond the
budget and type-count filters; exactness is the point.
"""

from __future__ import annotations

import decimal
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Sequence

import numpy as np

from .core import (
    DegenerateScenarioError,
    OracleAnnotation,
    Project,
    Purchase,
    ResourceEnv,
    Scenario,
)


@dataclass(frozen=True)
class PurchaseSpace:
    """All valid single-agent purchases for an environment, in lexicographic order."""

    env: ResourceEnv
    quantities: np.ndarray  # (n, num_resources) int64
    supply: np.ndarray  # (num_resources,) int64

    def __len__(self) -> int:
        return len(self.quantities)

    def purchase(self, index: int) -> Purchase:
        row = self.quantities[index]
        return Purchase(
            {r: int(q) for r, q in zip(self.env.resource_ids, row) if q}
        )


def _env_key(env: ResourceEnv):
    return (
        env.resource_ids,
        tuple(env.supply[r] for r in env.resource_ids),
        tuple(env.unit_cost[r] for r in env.resource_ids),
        env.budget,
        env.max_types,
    )


@lru_cache(maxsize=32)
def _build_space(key) -> PurchaseSpace:
    resource_ids, supply, costs, budget, max_types = key
    # Scale costs to integers so the budget filter stays exact.
    denom = lcm(*(c.denominator for c in costs), budget.denominator)
    int_costs = np.array([int(c * denom) for c in costs], dtype=np.int64)
    int_budget = int(budget * denom)
    bounds = [
        min(s, int(budget // c)) for s, c in zip(supply, costs)
    ]
    grids = np.meshgrid(*(np.arange(b + 1) for b in bounds), indexing="ij")
    quantities = np.stack([g.ravel() for g in grids], axis=-1).astype(np.int64)
    cost = quantities @ int_costs
    types = (quantities > 0).sum(axis=1)
    mask = (cost <= int_budget) & (types <= max_types)
    env = ResourceEnv(
        resource_ids=resource_ids,
        supply=dict(zip(resource_ids, supply)),
        unit_cost=dict(zip(resource_ids, costs)),
        budget=budget,
        max_types=max_types,
    )
    return PurchaseSpace(
        env=env,
        quantities=quantities[mask],
        supply=np.array(supply, dtype=np.int64),
    )


def purchase_space(env: ResourceEnv) -> PurchaseSpace:
    return _build_space(_env_key(env))


def _run_vectors(
    space: PurchaseSpace, projects: Sequence[Project]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Enumerate all run vectors feasible under *some* purchase in the space.

    Returns (runs, usage, reward): runs and usage are (k, ...), reward is (k,).
    """
    ids = space.env.resource_ids
    max_q = space.quantities.max(axis=0)
    bounds = []
    for p in projects:
        req = np.array([p.requirements.get(r, 0) for r in ids], dtype=np.int64)
        with np.errstate(divide="ignore"):
            cap = np.where(req > 0, max_q // np.maximum(req, 1), np.iinfo(np.int64).max)
        bounds.append(int(cap.min()))
    grids = np.meshgrid(*(np.arange(b + 1) for b in bounds), indexing="ij")
    runs = np.stack([g.ravel() for g in grids], axis=-1).astype(np.int64)
    req_matrix = np.array(
        [[p.requirements.get(r, 0) for r in ids] for p in projects], dtype=np.int64
    )
    rewards = np.array([p.reward for p in projects], dtype=np.int64)
    usage = runs @ req_matrix
    return runs, usage, rewards


def reward_table(space: PurchaseSpace, projects: Sequence[Project]) -> np.ndarray:
    """Exact best reward for every purchase in the space, as an (n,) array."""
    runs, usage, rewards = _run_vectors(space, projects)
    total = runs @ rewards
    feasible = (usage[None, :, :] <= space.quantities[:, None, :]).all(axis=2)
    return np.where(feasible, total[None, :], -1).max(axis=1).clip(min=0)


def best_reward_for_quantities(
    quantities, projects: Sequence[Project], env: ResourceEnv
) -> tuple[int, dict[str, int]]:
    """Exact maximum reward over all feasible run vectors for one purchase.

    Ties return the lexicographically-first run vector in project order.
    """
    if isinstance(quantities, Purchase):
        quantities = quantities.quantities
    ids = env.resource_ids
    q = np.array([quantities.get(r, 0) for r in ids], dtype=np.int64)
    bounds = []
    for p in projects:
        req = np.array([p.requirements.get(r, 0) for r in ids], dtype=np.int64)
        cap = np.where(req > 0, q // np.maximum(req, 1), np.iinfo(np.int64).max)
        bounds.append(int(cap.min()))
    grids = np.meshgrid(*(np.arange(b + 1) for b in bounds), indexing="ij")
    runs = np.stack([g.ravel() for g in grids], axis=-1).astype(np.int64)
    req_matrix = np.array(
        [[p.requirements.get(r, 0) for r in ids] for p in projects], dtype=np.int64
    )
    usage = runs @ req_matrix
    feasible = (usage <= q[None, :]).all(axis=1)
    totals = runs @ np.array([p.reward for p in projects], dtype=np.int64)
    totals = np.where(feasible, totals, -1)
    best = int(totals.max())
    if best <= 0:
        return max(best, 0), {p.name: 0 for p in projects}
    # Lexicographically-first winner: meshgrid 'ij' order is already lexicographic.
    winner = runs[int(np.argmax(totals == best))]
    return best, {p.name: int(n) for p, n in zip(projects, winner)}


def individual_optimum(
    agent_index: int, scenario: Scenario
) -> tuple[int, list[Purchase]]:
    """V for one agent plus every arg-max purchase."""
    space = purchase_space(scenario.env)
    table = reward_table(space, scenario.agent_projects[agent_index])
    v = int(table.max())
    witnesses = [space.purchase(i) for i in np.flatnonzero(table == v)]
    return v, witnesses


def joint_optimum(
    scenario: Scenario,
) -> tuple[int, list[tuple[Purchase, Purchase, int, int]]]:
    """M over all non-overdrawing purchase pairs, with every optimal pair retained."""
    space = purchase_space(scenario.env)
    table_a = reward_table(space, scenario.agent_projects[0])
    table_b = reward_table(space, scenario.agent_projects[1])
    feasible = _pair_feasibility(space)
    joint = np.where(feasible, table_a[:, None] + table_b[None, :], -1)
    m = int(joint.max())
    pairs = []
    for i, j in zip(*np.nonzero(joint == m)):
        pairs.append(
            (space.purchase(int(i)), space.purchase(int(j)), int(table_a[i]), int(table_b[j]))
        )
    return m, pairs


@lru_cache(maxsize=32)
def _pair_feasibility_cached(key) -> np.ndarray:
    space = _build_space(key)
    q = space.quantities
    return (q[:, None, :] + q[None, :, :] <= space.supply[None, None, :]).all(axis=2)


def _pair_feasibility(space: PurchaseSpace) -> np.ndarray:
    return _pair_feasibility_cached(_env_key(space.env))


def solve(scenario: Scenario) -> OracleAnnotation:
    """Full annotation: V1, V2, M, and the optimal joint allocation set."""
    v1, _ = individual_optimum(0, scenario)
    v2, _ = individual_optimum(1, scenario)
    m, pairs = joint_optimum(scenario)
    return OracleAnnotation(v1=v1, v2=v2, m=m, optimal_joint_allocations=tuple(pairs))


def compatibility_ratio(scenario: Scenario) -> tuple[Fraction, str]:
    """Exact M/C plus the 2-decimal display value (round half away from zero)."""
    annotation = scenario.oracle if scenario.oracle is not None else solve(scenario)
    if annotation.c == 0:
        raise DegenerateScenarioError("degenerate scenario: C = 0")
    ratio = annotation.mc_ratio
    return ratio, round_ratio(ratio)


def round_ratio(ratio: Fraction) -> str:
    """2-decimal display rounding, half away from zero, as the pool tables print it."""
    d = decimal.Decimal(ratio.numerator) / decimal.Decimal(ratio.denominator)
    return str(d.quantize(decimal.Decimal("0.01"), rounding=decimal.ROUND_HALF_UP))


def verify_annotation(scenario: Scenario) -> list[str]:
    """Recompute the oracle and report every mismatch against the stored annotation."""
    if scenario.oracle is None:
        return ["scenario has no stored oracle annotation"]
    fresh = solve(scenario)
    problems = []
    for name in ("v1", "v2", "m"):
        stored, recomputed = getattr(scenario.oracle, name), getattr(fresh, name)
        if stored != recomputed:
            problems.append(f"{name}: stored {stored}, recomputed {recomputed}")
    return problems
