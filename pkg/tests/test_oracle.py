from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import reference_enum as ref
from negolab.core import DEFAULT_ENV, Project, Purchase, Scenario
from negolab.oracle import (
    best_reward_for_quantities,
    compatibility_ratio,
    individual_optimum,
    joint_optimum,
    purchase_space,
    round_ratio,
    solve,
    verify_annotation,
)


def project_strategy(name: str):
    resources = st.lists(
        st.sampled_from(DEFAULT_ENV.resource_ids), min_size=1, max_size=2, unique=True
    )
    return resources.flatmap(
        lambda rs: st.builds(
            Project,
            name=st.just(name),
            requirements=st.fixed_dictionaries(
                {r: st.integers(min_value=1, max_value=6) for r in rs}
            ),
            reward=st.integers(min_value=1, max_value=10),
        )
    )


def affordable(p: Project) -> bool:
    return p.run_cost(DEFAULT_ENV) <= DEFAULT_ENV.budget and all(
        n <= DEFAULT_ENV.supply[r] for r, n in p.requirements.items()
    )


scenario_strategy = st.builds(
    lambda a, b: Scenario("prop", DEFAULT_ENV, ((a,), (b,))),
    project_strategy("pa").filter(affordable),
    project_strategy("pb").filter(affordable),
)


def _space_maps():
    space = purchase_space(DEFAULT_ENV)
    return [space.purchase(i).quantities for i in range(len(space))]


class TestPurchaseSpace:
    def test_matches_recursive_generator(self):
        ours = {tuple(sorted(q.items())) for q in _space_maps()}
        theirs = {
            tuple(sorted(vec.items()))
            for vec in ref.enumerate_quantity_vectors(DEFAULT_ENV)
        }
        assert ours == theirs

    def test_every_point_is_valid(self):
        from negolab.core import validate_purchase

        for q in _space_maps():
            assert validate_purchase(Purchase(dict(q)), DEFAULT_ENV, []) == []


class TestBestReward:
    @given(scenario=scenario_strategy, data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_agrees_with_recursive_search(self, scenario, data):
        vectors = ref.enumerate_quantity_vectors(DEFAULT_ENV)
        vec = data.draw(st.sampled_from(vectors))
        got, _ = best_reward_for_quantities(vec, scenario.projects_for(0), DEFAULT_ENV)
        want = ref.best_reward(vec, scenario.projects_for(0))
        assert got == want


class TestOptima:
    @given(scenario=scenario_strategy)
    @settings(max_examples=25, deadline=None)
    def test_individual_optimum_matches_reference(self, scenario):
        v, witnesses = individual_optimum(0, scenario)
        assert v == ref.individual_max(0, scenario)
        assert witnesses  # at least one witness purchase

    @given(scenario=scenario_strategy)
    @settings(max_examples=12, deadline=None)
    def test_joint_optimum_matches_reference(self, scenario):
        m, pairs = joint_optimum(scenario)
        assert m == ref.joint_max(scenario)
        for a, b, ra, rb in pairs:
            assert ra + rb == m
            # pair respects supply
            for r in DEFAULT_ENV.resource_ids:
                assert a.quantity(r) + b.quantity(r) <= DEFAULT_ENV.supply[r]

    def test_joint_at_least_each_individual(self, scenarios):
        for s in scenarios.values():
            assert s.oracle.m >= s.oracle.v1
            assert s.oracle.m >= s.oracle.v2

    def test_joint_at_most_sum(self, scenarios):
        for s in scenarios.values():
            assert s.oracle.m <= s.oracle.c


class TestBuiltinPool:
    def test_all_annotations_verify(self, scenarios):
        for s in scenarios.values():
            assert verify_annotation(s) == []

    def test_reference_agreement_on_gen_012(self, gen_012):
        assert ref.individual_max(0, gen_012) == 27
        assert ref.individual_max(1, gen_012) == 27
        assert ref.joint_max(gen_012) == 29

    def test_witness_rewards_recompute(self, scenarios):
        from negolab.core import compute_reward

        for s in scenarios.values():
            for a, b, ra, rb in s.oracle.optimal_joint_allocations:
                got_a, _ = compute_reward(Purchase(dict(a.quantities)), s.projects_for(0))
                got_b, _ = compute_reward(Purchase(dict(b.quantities)), s.projects_for(1))
                # recorded witness rewards are best-assignment values
                assert got_a <= ra or got_a == ra
                assert ra + rb == s.oracle.m


class TestRatioRounding:
    def test_half_rounds_away_from_zero(self):
        assert round_ratio(Fraction(545, 1000)) == "0.55"
        assert round_ratio(Fraction(535, 1000)) == "0.54"

    def test_down(self):
        assert round_ratio(Fraction(29, 54)) == "0.54"
        assert round_ratio(Fraction(1, 2)) == "0.50"

    def test_compatibility_ratio(self, gen_012):
        exact, display = compatibility_ratio(gen_012)
        assert exact == Fraction(29, 54)
        assert display == "0.54"


class TestSolveSpeed:
    def test_solve_under_five_seconds(self, gen_012):
        import time

        start = time.monotonic()
        solve(gen_012)
        assert time.monotonic() - start < 5.0
