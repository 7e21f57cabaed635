"""Outcome and process metrics over game traces.

Every rate is reported with its numerator and denominator so downstream
consumers can audit and re-aggregate. Rounds whose decision was auto-filled
after retry exhaustion are excluded from all analyses. "Suboptimal" means
joint_reward < M, which includes annulled rounds unless a metric explicitly
conditions on non-annulled predecessors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .core import Purchase
from .engine import GameTrace, RoundRecord
from .forge import IDENTITY_THEME, Theme, load_themes
from .oracle import round_ratio


@dataclass(frozen=True)
class Rate:
    numerator: int
    denominator: int

    @property
    def value(self) -> Optional[float]:
        return self.numerator / self.denominator if self.denominator else None

    def to_dict(self) -> dict:
        return {
            "numerator": self.numerator,
            "denominator": self.denominator,
            "value": self.value,
        }


def analysis_rounds(trace: GameTrace) -> list[RoundRecord]:
    """Rounds usable for analysis: auto-filled (fallback) rounds are dropped."""
    return [r for r in trace.rounds if not r.fallback]


def _is_optimal(record: RoundRecord) -> bool:
    if record.outcome.efficiency is None:
        raise ValueError("round lacks an oracle annotation")
    return record.outcome.efficiency == 1


def _joint_key(record: RoundRecord) -> tuple:
    a, b = record.decisions
    return (tuple(sorted(a.quantities.items())), tuple(sorted(b.quantities.items())))


def _swap_key(key: tuple) -> tuple:
    return (key[1], key[0])


def outcome_metrics(traces: Sequence[GameTrace]) -> dict:
    rounds = [r for t in traces for r in analysis_rounds(t)]
    n = len(rounds)
    annulled = sum(1 for r in rounds if r.outcome.annulled)
    optimal = sum(1 for r in rounds if _is_optimal(r))
    ratios = [Fraction(r.outcome.efficiency) for r in rounds]
    mean_eff = float(sum(ratios) / n) if n else None
    return {
        "overdraw_rate": Rate(annulled, n).to_dict(),
        "efficiency_mean": {"value": mean_eff, "rounds": n},
        "optimum_rate": Rate(optimal, n).to_dict(),
    }


def _consecutive_pairs(trace: GameTrace) -> list[tuple[RoundRecord, RoundRecord]]:
    """Adjacent non-fallback round pairs of a non-rotating game."""
    if trace.config.project_rotation != "fixed":
        return []
    rounds = trace.rounds
    pairs = []
    for prev, cur in zip(rounds, rounds[1:]):
        if not prev.fallback and not cur.fallback:
            pairs.append((prev, cur))
    return pairs


def wsls(traces: Sequence[GameTrace]) -> dict:
    """Win-stay / lose-shift over consecutive joint allocations.

    Win-stay: exact joint-allocation repeat given the previous round was not
    annulled. Lose-shift: allocation changed given the previous round was not
    jointly optimal (annulled or suboptimal). Rotating games are filtered out.
    """
    stay_n = stay_d = shift_n = shift_d = 0
    for trace in traces:
        for prev, cur in _consecutive_pairs(trace):
            repeated = _joint_key(cur) == _joint_key(prev)
            if not prev.outcome.annulled:
                stay_d += 1
                stay_n += repeated
            if not _is_optimal(prev):
                shift_d += 1
                shift_n += not repeated
    return {
        "win_stay": Rate(stay_n, stay_d).to_dict(),
        "lose_shift": Rate(shift_n, shift_d).to_dict(),
    }


def payoff_alternation(traces: Sequence[GameTrace]) -> dict:
    """Whether the higher-reward seat flips between consecutive rounds.

    Flip indicator: 1[(r_A(t) > r_B(t)) != (r_A(t+1) > r_B(t+1))]. The 2-round
    rate averages over consecutive pairs; the 4-round rate counts games whose
    every consecutive pair flips.
    """
    flips = pairs = 0
    alternating_games = eligible_games = 0
    for trace in traces:
        game_pairs = _consecutive_pairs(trace)
        game_flips = 0
        for prev, cur in game_pairs:
            a0, b0 = prev.outcome.rewards
            a1, b1 = cur.outcome.rewards
            flip = (a0 > b0) != (a1 > b1)
            flips += flip
            game_flips += flip
        pairs += len(game_pairs)
        full = len(trace.rounds) - 1
        if trace.config.project_rotation == "fixed" and full >= 1 and len(game_pairs) == full:
            eligible_games += 1
            if game_flips == full:
                alternating_games += 1
    return {
        "alternation_2rd": Rate(flips, pairs).to_dict(),
        "alternation_4rd": Rate(alternating_games, eligible_games).to_dict(),
    }


def _equal_split(record: RoundRecord) -> bool:
    a, b = record.decisions
    return any(q > 0 and b.quantity(r) == q for r, q in a.quantities.items())


def fairness_metrics(traces: Sequence[GameTrace]) -> dict:
    """Equal splits of a contested resource and their co-occurrence with
    suboptimal outcomes. Equal split needs a positive shared quantity."""
    rounds = [r for t in traces for r in analysis_rounds(t)]
    n = len(rounds)
    equal = sum(1 for r in rounds if _equal_split(r))
    perfunctory = sum(1 for r in rounds if _equal_split(r) and not _is_optimal(r))
    return {
        "equal_split_rate": Rate(equal, n).to_dict(),
        "perfunctory_fairness_rate": Rate(perfunctory, n).to_dict(),
    }


def anchoring_metrics(
    traces: Sequence[GameTrace],
    scenario_ratios: Optional[Mapping[str, str]] = None,
) -> dict:
    """Exact joint-allocation repeats, and repeats of a suboptimal-but-clean
    predecessor (stubborn anchoring), with stability and ratio breakdowns."""
    repeat_n = repeat_d = stubborn_n = stubborn_d = 0
    by_stability: dict[str, list[int]] = {}
    by_ratio: dict[str, list[int]] = {}
    for trace in traces:
        stability = trace.config.partner_stability
        ratio = (
            scenario_ratios.get(trace.config.scenario_ids[0])
            if scenario_ratios is not None
            else None
        )
        for prev, cur in _consecutive_pairs(trace):
            repeated = _joint_key(cur) == _joint_key(prev)
            repeat_d += 1
            repeat_n += repeated
            bucket = by_stability.setdefault(stability, [0, 0])
            bucket[1] += 1
            bucket[0] += repeated
            if ratio is not None:
                rbucket = by_ratio.setdefault(ratio, [0, 0])
                rbucket[1] += 1
                rbucket[0] += repeated
            if not prev.outcome.annulled and not _is_optimal(prev):
                stubborn_d += 1
                stubborn_n += repeated
    return {
        "repeat_rate": Rate(repeat_n, repeat_d).to_dict(),
        "stubborn_anchor_rate": Rate(stubborn_n, stubborn_d).to_dict(),
        "repeat_by_stability": {
            k: Rate(v[0], v[1]).to_dict() for k, v in sorted(by_stability.items())
        },
        "repeat_by_ratio": {
            k: Rate(v[0], v[1]).to_dict() for k, v in sorted(by_ratio.items())
        },
    }


# --- proposal extraction ----------------------------------------------------

_PROPOSAL_FORMS = (
    r"you\s+(?:take|get|keep|buy|grab|can\s+(?:take|have)|should\s+(?:take|buy|get))",
    r"leave\s+(?:me|you)",
    r"(?:take|have)\s+the\s+remaining",
)

_PROPOSAL_RE = re.compile(
    r"(?:" + "|".join(_PROPOSAL_FORMS) + r")\s+"
    r"(?:all\s+)?(?:the\s+)?(\d+)\s*(?:x\s*|×\s*)?"
    r"(?:units?\s+of\s+|of\s+(?:the\s+)?)?"
    r"([A-Za-z_][A-Za-z0-9_]*)",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class Proposal:
    proposer: int
    turn_index: int
    pairs: dict[str, int]  # abstract resource id -> quantity

    def matched_by(self, purchase: Purchase) -> bool:
        return all(purchase.quantity(r) == q for r, q in self.pairs.items())


def _resource_lookup(theme: Theme) -> dict[str, str]:
    table = {rid.lower(): rid for rid in theme.resource_names}
    table.update({name.lower(): rid for rid, name in theme.resource_names.items()})
    return table


def extract_proposals(
    record: RoundRecord, theme: Theme = IDENTITY_THEME
) -> list[Proposal]:
    """Deterministic pattern matcher for other-directed proposals in speech.

    Matches directive forms ("you take 4 stone", "you get 4 of the gold")
    carrying an integer and a resource name, themed names resolved via the
    active theme. One proposal per turn, merging all matched pairs.
    """
    lookup = _resource_lookup(theme)
    proposals = []
    for turn in record.turns:
        pairs: dict[str, int] = {}
        for qty, name in _PROPOSAL_RE.findall(turn.speech):
            rid = lookup.get(name.lower())
            if rid is not None:
                pairs[rid] = int(qty)
        if pairs:
            proposals.append(Proposal(turn.speaker, turn.turn_index, pairs))
    return proposals


def deference_metrics(
    traces: Sequence[GameTrace],
    extractor: Callable[[RoundRecord, Theme], list[Proposal]] = extract_proposals,
) -> dict:
    """Other-directed proposals and exact-match deference by the responder.

    Deference: the responder's final purchase equals every proposed
    (resource, quantity) pair. Followed-exactly is reported on two bases
    (per proposal and per proposal-round) because the construct's base is
    ambiguous.
    """
    themes = load_themes()
    rounds_total = 0
    proposal_rounds = 0
    proposals_total = 0
    followed_proposals = 0
    followed_rounds = 0
    round1_rounds = round1_proposal_rounds = 0
    by_rotation: dict[str, list[int]] = {}
    for trace in traces:
        theme = themes.get(trace.config.theme_id, IDENTITY_THEME)
        rotation = trace.config.project_rotation
        for record in analysis_rounds(trace):
            rounds_total += 1
            props = extractor(record, theme)
            is_round1_fixed = rotation == "fixed" and record.round_number == 1
            if is_round1_fixed:
                round1_rounds += 1
            bucket = by_rotation.setdefault(rotation, [0, 0])
            bucket[1] += 1
            if not props:
                continue
            proposal_rounds += 1
            bucket[0] += 1
            if is_round1_fixed:
                round1_proposal_rounds += 1
            any_followed = False
            for prop in props:
                proposals_total += 1
                responder = 1 - prop.proposer
                if prop.matched_by(record.decisions[responder]):
                    followed_proposals += 1
                    any_followed = True
            followed_rounds += any_followed
    return {
        "proposal_rate": Rate(proposal_rounds, rounds_total).to_dict(),
        "proposal_rate_round1": Rate(round1_proposal_rounds, round1_rounds).to_dict(),
        "followed_per_proposal": Rate(followed_proposals, proposals_total).to_dict(),
        "followed_per_proposal_round": Rate(followed_rounds, proposal_rounds).to_dict(),
        "proposal_rate_by_rotation": {
            k: Rate(v[0], v[1]).to_dict() for k, v in sorted(by_rotation.items())
        },
    }


def early_decision_metrics(traces: Sequence[GameTrace]) -> dict:
    """Finalizing before the per-seat talk limit. A finalization at the forced
    decision prompt, or exactly at the limit, is not early. No-talk games are
    excluded (the construct is undefined without cheap talk)."""
    seat_early = [0, 0]
    seat_rounds = 0
    round_early = 0
    for trace in traces:
        if not trace.config.enable_cheap_talk:
            continue
        for record in analysis_rounds(trace):
            seat_rounds += 1
            for seat in (0, 1):
                seat_early[seat] += record.early_decision[seat]
            round_early += any(record.early_decision)
    return {
        "early_decision_rate_round": Rate(round_early, seat_rounds).to_dict(),
        "early_decision_rate_seat_a": Rate(seat_early[0], seat_rounds).to_dict(),
        "early_decision_rate_seat_b": Rate(seat_early[1], seat_rounds).to_dict(),
    }


def convergence_metrics(traces: Sequence[GameTrace]) -> dict:
    """First round reaching the joint optimum (mean over games that get
    there), and recovery: annulled rounds whose successor is not annulled."""
    first_optimum_rounds = []
    recover_n = recover_d = 0
    for trace in traces:
        rounds = analysis_rounds(trace)
        first = next((r.round_number for r in rounds if _is_optimal(r)), None)
        if first is not None:
            first_optimum_rounds.append(first)
        for prev, cur in _consecutive_pairs(trace):
            if prev.outcome.annulled:
                recover_d += 1
                recover_n += not cur.outcome.annulled
    mean_first = (
        sum(first_optimum_rounds) / len(first_optimum_rounds)
        if first_optimum_rounds
        else None
    )
    return {
        "first_optimum_round_mean": {
            "value": mean_first,
            "games_reaching_optimum": len(first_optimum_rounds),
        },
        "post_overdraw_recovery_rate": Rate(recover_n, recover_d).to_dict(),
    }


def enrichment_delta(
    label_rows: Sequence[Mapping],
    label_names: Iterable[str],
    focal: Callable[[Mapping], bool],
    comparison: Callable[[Mapping], bool],
) -> dict:
    """Percentage-point prevalence differences between two round partitions.

    `label_rows` are per-round records with boolean fields per label plus
    whatever keys the predicates need.
    """
    focal_rows = [r for r in label_rows if focal(r)]
    comparison_rows = [r for r in label_rows if comparison(r)]
    if not focal_rows or not comparison_rows:
        raise ValueError("focal and comparison sets must both be nonempty")
    out = {}
    for label in label_names:
        p_focal = sum(bool(r[label]) for r in focal_rows) / len(focal_rows)
        p_comp = sum(bool(r[label]) for r in comparison_rows) / len(comparison_rows)
        out[label] = {
            "delta_pp": 100.0 * (p_focal - p_comp),
            "focal": Rate(sum(bool(r[label]) for r in focal_rows), len(focal_rows)).to_dict(),
            "comparison": Rate(
                sum(bool(r[label]) for r in comparison_rows), len(comparison_rows)
            ).to_dict(),
        }
    return out


def metrics_report(traces: Sequence[GameTrace]) -> dict:
    report = {
        "games": len(traces),
        "rounds_analyzed": sum(len(analysis_rounds(t)) for t in traces),
        "rounds_excluded_fallback": sum(
            1 for t in traces for r in t.rounds if r.fallback
        ),
    }
    report.update(outcome_metrics(traces))
    report.update(wsls(traces))
    report.update(payoff_alternation(traces))
    report.update(fairness_metrics(traces))
    report.update(anchoring_metrics(traces))
    report.update(deference_metrics(traces))
    report.update(early_decision_metrics(traces))
    report.update(convergence_metrics(traces))
    return report


def condition_pivot(
    traces: Sequence[GameTrace],
    scenario_ratios: Optional[Mapping[str, str]] = None,
) -> dict:
    """Per-condition report: (model pair, ratio, stability, rotation) cells."""
    groups: dict[tuple, list[GameTrace]] = {}
    for trace in traces:
        ratio = None
        if scenario_ratios is not None:
            ratio = scenario_ratios.get(trace.config.scenario_ids[0])
        key = (
            " vs ".join(trace.agent_names),
            ratio or "?",
            trace.config.partner_stability,
            trace.config.project_rotation,
        )
        groups.setdefault(key, []).append(trace)
    return {
        "|".join(key): metrics_report(cell) for key, cell in sorted(groups.items())
    }


def scenario_ratio_table(scenarios: Mapping) -> dict[str, str]:
    """scenario_id -> display-rounded M/C, for pivot keys."""
    out = {}
    for sid, scenario in scenarios.items():
        if scenario.oracle is not None:
            out[sid] = f"{float(round_ratio(scenario.oracle.mc_ratio)):.2f}"
    return out
