"""Command-line interface.

Verbs: forge (generate scenarios), oracle (verify annotations), run
(experiment grids), analyze (metrics reports), judge (label traces, kappa),
export (relational tables), serve (HTTP service), validate-pass1 (one-shot
full-information solve by an LLM binding, used for pool curation).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path


def _load_scenarios(paths: list[str]) -> dict:
    from .core import Scenario, load_builtin_scenarios

    scenarios = dict(load_builtin_scenarios())
    for raw in paths:
        p = Path(raw)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        for f in files:
            s = Scenario.load(f)
            scenarios[s.scenario_id] = s
    return scenarios


def cmd_forge(args) -> int:
    from .forge import ForgeError, ForgeTarget, forge_scenario
    from .oracle import solve

    target = ForgeTarget(Fraction(args.target).limit_denominator(100), Fraction(args.tolerance).limit_denominator(1000))
    try:
        scenario = forge_scenario(target, seed=args.seed)
    except ForgeError as exc:
        print(f"forge failed: {exc}", file=sys.stderr)
        return 1
    annotated = scenario.with_oracle(solve(scenario))
    out = Path(args.out or f"{annotated.scenario_id}.json")
    annotated.save(out)
    oracle = annotated.oracle
    print(
        f"{annotated.scenario_id}: V1={oracle.v1} V2={oracle.v2} M={oracle.m} "
        f"M/C={float(oracle.mc_ratio):.4f} -> {out}"
    )
    return 0


def cmd_oracle(args) -> int:
    from .oracle import round_ratio, solve, verify_annotation

    scenarios = _load_scenarios(args.scenarios)
    failures = 0
    for sid, scenario in sorted(scenarios.items()):
        if scenario.oracle is None:
            annotation = solve(scenario)
            print(f"{sid}: (unannotated) M/C={float(round_ratio(annotation.mc_ratio)):.2f}")
            continue
        problems = verify_annotation(scenario)
        ratio = float(round_ratio(scenario.oracle.mc_ratio))
        if problems:
            failures += 1
            print(f"{sid}: FAIL {problems}")
        else:
            print(
                f"{sid}: ok V1={scenario.oracle.v1} V2={scenario.oracle.v2} "
                f"M={scenario.oracle.m} M/C={ratio:.2f}"
            )
    return 1 if failures else 0


def cmd_run(args) -> int:
    from .agents import ScriptedGreedyAgent, ScriptedOracleAgent
    from .engine import run_game
    from .store import ExperimentRun, TraceStore, grid_configs, new_experiment_run

    scenarios = _load_scenarios(args.scenarios)
    store = TraceStore(args.store, scenarios)
    grid = json.loads(Path(args.grid).read_text())
    run = new_experiment_run(grid.get("grid", grid), grid.get("repetitions", 1))
    agent_type = args.agents

    def build(seat: int, scenario):
        if agent_type == "scripted_oracle":
            return ScriptedOracleAgent(seat, scenario)
        if agent_type == "scripted_greedy":
            return ScriptedGreedyAgent(seat, scenario)
        raise SystemExit(f"unsupported agent type for headless run: {agent_type}")

    done = 0
    for config in grid_configs(run):
        scenario = scenarios[config.scenario_ids[0]]
        trace = run_game(config, [build(0, scenario), build(1, scenario)], scenarios)
        store.persist_trace(trace)
        done += 1
    print(f"experiment {run.experiment_run_id}: {done} games -> {args.store}")
    return 0


def cmd_analyze(args) -> int:
    from .metrics import condition_pivot, metrics_report, scenario_ratio_table
    from .store import TraceStore, export_relational, write_relational_csv

    scenarios = _load_scenarios(args.scenarios)
    store = TraceStore(args.store, scenarios)
    traces = store.list_traces()
    report = metrics_report(traces)
    if args.pivot:
        report["by_condition"] = condition_pivot(traces, scenario_ratio_table(scenarios))
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    if args.csv:
        tables = export_relational(traces, store.load_annotations())
        write_relational_csv(tables, args.csv)
    return 0


def cmd_export(args) -> int:
    from .store import TraceStore, export_relational, write_relational_csv

    scenarios = _load_scenarios(args.scenarios)
    store = TraceStore(args.store, scenarios)
    tables = export_relational(store.list_traces(), store.load_annotations())
    write_relational_csv(tables, args.out)
    print(f"exported {', '.join(f'{k}={len(v)}' for k, v in tables.items())} -> {args.out}")
    return 0


def cmd_judge(args) -> int:
    from .agents import load_bindings
    from .judge import cohen_kappa, judge_game, load_annotations, prevalence
    from .store import TraceStore

    if args.judge_cmd == "kappa":
        a = load_annotations(args.labels_a)
        b = load_annotations(args.labels_b)
        from .judge import AUXILIARY_TAGS, CORE_LABELS

        for label in CORE_LABELS + AUXILIARY_TAGS:
            kappa = cohen_kappa(a, b, label)
            shown = "-" if kappa is None else f"{kappa:.3f}"
            print(f"{label}: {shown}")
        return 0

    scenarios = _load_scenarios(args.scenarios)
    store = TraceStore(args.store, scenarios)
    bindings = load_bindings()
    binding = bindings[args.binding]
    judged = unjudged = 0
    for trace in store.list_traces():
        annotations = judge_game(trace, binding, rubric_version=args.rubric)
        if annotations is None:
            unjudged += 1
            continue
        store.persist_annotations(annotations)
        judged += 1
    print(f"judged {judged} games, {unjudged} unjudged")
    if judged:
        print(json.dumps(prevalence(store.load_annotations()), indent=2))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.store, host=args.host, port=args.port)
    return 0


def cmd_validate_pass1(args) -> int:
    """One-shot full-information solve by an LLM binding, compared to the
    oracle optimum. Used for scenario-pool curation, never gating CI."""
    from .agents import llm_chat, load_bindings, parse_agent_response
    from .forge import IDENTITY_THEME, apply_theme
    from .oracle import individual_optimum, joint_optimum
    from . import prompts
    from .core import compute_reward

    scenarios = _load_scenarios(args.scenarios)
    scenario = scenarios[args.scenario]
    binding = load_bindings()[args.binding]
    themed = apply_theme(scenario, IDENTITY_THEME)
    seat = args.seat
    system = prompts.build_system_prompt(
        seat, themed, thinking_enabled=True, transparency="requirements_and_rewards"
    )
    user = (
        "This is a single-shot solve: the other party will not purchase anything. "
        "Submit the purchase that maximizes your own total reward.\n\n"
        + prompts.decision_prompt(scenario.env)
    )
    raw, _, _ = llm_chat(binding, [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ])
    response = parse_agent_response(raw)
    if response.action is None:
        print("no purchase submitted: fail")
        return 1
    reward, _ = compute_reward(response.action, scenario.projects_for(seat))
    v, _ = individual_optimum(seat, scenario)
    print(f"reward={reward} optimum={v} pass@1={'pass' if reward == v else 'fail'}")
    return 0 if reward == v else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="negolab")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("forge", help="generate a scenario at a target compatibility ratio")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("oracle", help="verify scenario annotations against fresh solves")
    p.add_argument("scenarios", nargs="*", help="scenario files or directories (builtin pool always included)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("run", help="run an experiment grid headlessly")
    p.add_argument("--grid", required=True, help="grid definition JSON file")
    p.add_argument("--store", required=True)
    p.add_argument("--agents", default="scripted_oracle",
                   choices=["scripted_oracle", "scripted_greedy"])
    p.add_argument("--scenarios", nargs="*", default=[])
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="metrics report over stored traces")
    p.add_argument("--store", required=True)
    p.add_argument("--report", help="write JSON report here (default: stdout)")
    p.add_argument("--csv", help="also write relational CSV tables here")
    p.add_argument("--pivot", action="store_true", help="include per-condition pivot")
    p.add_argument("--scenarios", nargs="*", default=[])
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export", help="relational CSV export of stored traces")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenarios", nargs="*", default=[])
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("judge", help="label traces or compute rater agreement")
    judge_sub = p.add_subparsers(dest="judge_cmd", required=True)
    pr = judge_sub.add_parser("run")
    pr.add_argument("--store", required=True)
    pr.add_argument("--binding", required=True)
    pr.add_argument("--rubric", default="v3")
    pr.add_argument("--scenarios", nargs="*", default=[])
    pr.set_defaults(func=cmd_judge)
    pk = judge_sub.add_parser("kappa")
    pk.add_argument("labels_a")
    pk.add_argument("labels_b")
    pk.set_defaults(func=cmd_judge)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate-pass1", help="LLM one-shot solve vs the oracle optimum")
    p.add_argument("--scenario", required=True)
    p.add_argument("--binding", required=True)
    p.add_argument("--seat", type=int, default=0)
    p.add_argument("--scenarios", nargs="*", default=[])
    p.set_defaults(func=cmd_validate_pass1)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
