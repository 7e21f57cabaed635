"""HTTP service: launch and watch games, play a seat live, query traces.

The service wraps a TraceStore and the game engine. Each in-flight game runs
on its own thread; events are appended to a per-game, strictly-sequenced list
that feeds both the SSE stream and the polling endpoint. Privacy filtering is
applied per subscriber view: spectators never see any thinking, seat-bound
views never see the opponent's thinking.
"""

from __future__ import annotations

import dataclasses
import json
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .agents import (
    Agent,
    AgentResponse,
    LLMAgent,
    ScriptedGreedyAgent,
    ScriptedOracleAgent,
    load_bindings,
)
from .core import Purchase, Scenario, validate_purchase
from .engine import GameConfig, GameTrace, run_game, _abstract_purchase, _resolve_theme
from .forge import apply_theme
from .metrics import metrics_report, scenario_ratio_table, condition_pivot
from .store import TraceStore, grid_configs, new_experiment_run

SEAT_NAMES = ("agent_a", "agent_b")


class HumanAgent:
    """A seat driven by HTTP submissions. take_turn blocks until a valid
    submission arrives; invalid purchases are bounced back to the submitter
    with the violation list and the seat keeps waiting (unlimited corrections).
    """

    def __init__(self, seat: int, timeout_s: Optional[float] = None):
        self.seat = seat
        self.timeout_s = timeout_s
        self.inbox: queue.Queue = queue.Queue()

    def begin_round(self, round_number: int, scenario: Scenario) -> None:
        pass

    def take_turn(self, messages, phase, round_number, validator):
        deadline = time.monotonic() + self.timeout_s if self.timeout_s else None
        while True:
            timeout = max(0.0, deadline - time.monotonic()) if deadline else None
            try:
                submission, reply = self.inbox.get(timeout=timeout)
            except queue.Empty:
                # Wall-clock forfeit: the zero purchase is substituted.
                return (
                    AgentResponse(thinking="", speech="(timed out)", action=Purchase({})),
                    [],
                )
            action = submission.get("action")
            speech = submission.get("speech") or ""
            if phase == "decision" and action is None:
                reply.put({"ok": False, "violations": ["decision phase requires a purchase"]})
                continue
            purchase = None
            if action is not None:
                try:
                    purchase = Purchase.from_dict(action)
                except (TypeError, ValueError, KeyError) as exc:
                    reply.put({"ok": False, "violations": [f"malformed purchase: {exc}"]})
                    continue
                violations = validator(purchase)
                if violations:
                    reply.put({"ok": False, "violations": violations})
                    continue
            elif not speech.strip():
                reply.put({"ok": False, "violations": ["empty turn: provide speech or a purchase"]})
                continue
            reply.put({"ok": True, "violations": []})
            return AgentResponse(thinking="", speech=speech or "(finalizes)", action=purchase), []

    def reflect(self, messages) -> str:
        return ""


@dataclass
class GameSession:
    game_id: str
    config: GameConfig
    agent_specs: Sequence[Mapping]
    events: list = field(default_factory=list)
    status: str = "running"
    error: Optional[str] = None
    trace: Optional[GameTrace] = None
    humans: dict = field(default_factory=dict)  # seat -> HumanAgent
    awaiting: Optional[dict] = None  # {"seat": int, "phase": str}
    lock: threading.Lock = field(default_factory=threading.Lock)
    new_event: threading.Condition = field(default_factory=threading.Condition)


def _filter_event(event: dict, view: str) -> dict:
    """Strip private fields per subscriber view. Engine events already omit
    thinking, but filter defensively in case payload shapes grow."""
    out = dict(event)
    out.pop("thinking", None)
    if view in ("seat_a", "seat_b") and out.get("kind") == "turn":
        pass  # speech is public; thinking never enters the event feed
    return out


def _filter_trace_view(trace: GameTrace, view: str) -> dict:
    data = trace.to_dict()
    if view == "full":
        return data
    data.pop("seat_contexts", None)
    own_seat = {"seat_a": 0, "seat_b": 1}.get(view)
    for rnd in data["rounds"]:
        for turn in rnd["turns"]:
            if own_seat is None or turn["speaker"] != own_seat:
                turn["thinking"] = ""
    if own_seat is not None:
        data["reflections"] = [
            r if i == own_seat else None for i, r in enumerate(data["reflections"])
        ]
    return data


def _build_agent(spec: Mapping, seat: int, scenario: Scenario, bindings) -> Agent:
    kind = spec.get("type", "scripted_oracle")
    if kind == "scripted_oracle":
        return ScriptedOracleAgent(seat, scenario)
    if kind == "scripted_greedy":
        return ScriptedGreedyAgent(seat, scenario)
    if kind == "human":
        return HumanAgent(seat, timeout_s=spec.get("timeout_s"))
    if kind == "llm":
        binding = bindings[spec["binding"]]
        return LLMAgent(seat, binding, mode=spec.get("mode", "thinking"))
    raise ValueError(f"unknown agent type {kind!r}")


def create_app(store: TraceStore):
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import StreamingResponse

    app = FastAPI(title="negolab", version="1.0")
    sessions: dict[str, GameSession] = {}
    experiments: dict[str, dict] = {}
    bindings = load_bindings()
    checkpoints = store.root / "checkpoints"
    checkpoints.mkdir(exist_ok=True)

    def session_or_404(game_id: str) -> GameSession:
        session = sessions.get(game_id)
        if session is None:
            raise HTTPException(404, f"unknown game {game_id}")
        return session

    def run_session(session: GameSession) -> None:
        config = session.config
        scenario = store.scenarios[config.scenario_ids[0]]

        def observer(event: dict) -> None:
            with session.lock:
                event = dict(event, seq=len(session.events))
                session.events.append(event)
            if event["kind"] == "round_settled":
                # durability checkpoint: settled rounds survive a restart
                path = checkpoints / f"{session.game_id}.jsonl"
                with open(path, "a") as fh:
                    fh.write(json.dumps(event, sort_keys=True) + "\n")
                    fh.flush()
            with session.new_event:
                session.new_event.notify_all()

        tracking_observer = observer

        class _TrackingAgent:
            """Wraps a seat to expose what the engine currently awaits, for
            the turn-order check on human submissions."""

            def __init__(self, inner: Agent, seat: int):
                self.inner = inner
                self.seat = seat

            def begin_round(self, round_number, scenario):
                self.inner.begin_round(round_number, scenario)

            def take_turn(self, messages, phase, round_number, validator):
                session.awaiting = {"seat": self.seat, "phase": phase}
                with session.new_event:
                    session.new_event.notify_all()
                try:
                    return self.inner.take_turn(messages, phase, round_number, validator)
                finally:
                    session.awaiting = None

            def reflect(self, messages):
                return self.inner.reflect(messages)

        try:
            agents = []
            for seat, spec in enumerate(session.agent_specs):
                agent = _build_agent(spec, seat, scenario, bindings)
                if isinstance(agent, HumanAgent):
                    session.humans[seat] = agent
                agents.append(_TrackingAgent(agent, seat))
            trace = run_game(config, agents, store.scenarios, observer=tracking_observer)
            names = tuple(
                spec.get("binding", spec.get("type", "unknown"))
                for spec in session.agent_specs
            )
            trace = dataclasses.replace(trace, agent_names=names)
            store.persist_trace(trace)
            session.trace = trace
            session.status = "done"
        except Exception as exc:  # surfaced via /games status
            session.status = "error"
            session.error = str(exc)
        with session.new_event:
            session.new_event.notify_all()

    @app.post("/experiments")
    def create_experiment(body: dict):
        run = new_experiment_run(body.get("grid", {}), body.get("repetitions", 1))
        experiments[run.experiment_run_id] = run.to_dict()
        return run.to_dict()

    @app.get("/experiments")
    def list_experiments():
        return list(experiments.values())

    @app.post("/experiments/{experiment_id}/launch")
    def launch_experiment(experiment_id: str, body: dict):
        from .store import ExperimentRun

        if experiment_id not in experiments:
            raise HTTPException(404, "unknown experiment")
        run = ExperimentRun.from_dict(experiments[experiment_id])
        agent_specs = body.get("agents", [{"type": "scripted_oracle"}] * 2)
        game_ids = []
        for config in grid_configs(run):
            game_ids.append(_launch(config, agent_specs))
        experiments[experiment_id]["status"] = {gid: "running" for gid in game_ids}
        return {"game_ids": game_ids}

    def _launch(config: GameConfig, agent_specs) -> str:
        from .engine import derive_game_id

        game_id = config.game_id or derive_game_id(config)
        config = GameConfig.from_dict({**config.to_dict(), "game_id": game_id})
        session = GameSession(game_id=game_id, config=config, agent_specs=agent_specs)
        sessions[game_id] = session
        thread = threading.Thread(target=run_session, args=(session,), daemon=True)
        thread.start()
        return game_id

    @app.post("/games")
    def launch_game(body: dict):
        config = GameConfig.from_dict(body["config"])
        agent_specs = body.get("agents", [{"type": "scripted_oracle"}] * 2)
        game_id = _launch(config, agent_specs)
        return {"game_id": game_id}

    @app.get("/games")
    def list_games():
        return [
            {
                "game_id": s.game_id,
                "status": s.status,
                "error": s.error,
                "events": len(s.events),
            }
            for s in sessions.values()
        ]

    @app.get("/games/{game_id}/state")
    def game_state(game_id: str, seat: Optional[int] = None):
        session = session_or_404(game_id)
        config = session.config
        scenario = store.scenarios[config.scenario_ids[0]]
        theme = _resolve_theme(config.theme_id)
        themed = apply_theme(scenario, theme)
        env = scenario.env
        state = {
            "game_id": game_id,
            "status": session.status,
            "awaiting": session.awaiting,
            "num_rounds": config.num_rounds,
            "cheap_talk_turns": config.cheap_talk_turns,
            "constraints": {
                "supply": {themed.resource_name(r): env.supply[r] for r in env.resource_ids},
                "unit_cost": {
                    themed.resource_name(r): float(env.unit_cost[r]) for r in env.resource_ids
                },
                "budget": float(env.budget),
                "max_types": env.max_types,
            },
        }
        if seat is not None:
            if seat not in (0, 1):
                raise HTTPException(400, "seat must be 0 or 1")
            state["projects"] = [
                {
                    "name": p.name,
                    "requirements": themed.themed_quantities(p.requirements),
                    "reward": p.reward,
                }
                for p in scenario.projects_for(seat)
            ]
        return state

    @app.post("/games/{game_id}/turns")
    def submit_turn(game_id: str, body: dict):
        session = session_or_404(game_id)
        seat = body.get("seat")
        if seat not in (0, 1):
            raise HTTPException(400, "seat must be 0 or 1")
        if seat not in session.humans:
            raise HTTPException(403, f"seat {seat} is not human-held")
        awaiting = session.awaiting
        if session.status != "running" or awaiting is None or awaiting["seat"] != seat:
            raise HTTPException(
                409,
                detail={
                    "error": "not this seat's turn",
                    "expected": awaiting,
                    "status": session.status,
                },
            )
        reply: queue.Queue = queue.Queue()
        session.humans[seat].inbox.put((body, reply))
        verdict = reply.get(timeout=60)
        if not verdict["ok"]:
            return {"accepted": False, "violations": verdict["violations"]}
        return {"accepted": True, "violations": []}

    @app.post("/games/{game_id}/validate")
    def validate(game_id: str, body: dict):
        """Server-side validation verdict for a candidate purchase (used by
        clients to cross-check their mirrored validator)."""
        session = session_or_404(game_id)
        config = session.config
        scenario = store.scenarios[config.scenario_ids[0]]
        theme = _resolve_theme(config.theme_id)
        themed = apply_theme(scenario, theme)
        seat = body.get("seat", 0)
        try:
            purchase = Purchase.from_dict(body["action"])
        except (TypeError, ValueError, KeyError) as exc:
            return {"valid": False, "violations": [f"malformed purchase: {exc}"]}
        violations = validate_purchase(
            _abstract_purchase(purchase, themed), scenario.env, scenario.projects_for(seat)
        )
        return {"valid": not violations, "violations": violations}

    @app.get("/games/{game_id}/trace")
    def get_trace(game_id: str, view: str = "full"):
        session = session_or_404(game_id)
        if session.trace is None:
            raise HTTPException(409, f"game is {session.status}")
        return _filter_trace_view(session.trace, view)

    @app.get("/games/{game_id}/events")
    def poll_events(game_id: str, since: int = 0, view: str = "spectator"):
        session = session_or_404(game_id)
        with session.lock:
            events = [_filter_event(e, view) for e in session.events[since:]]
        return {"events": events, "next": since + len(events), "status": session.status}

    @app.get("/games/{game_id}/events/stream")
    def stream_events(game_id: str, since: int = 0, view: str = "spectator"):
        session = session_or_404(game_id)

        def generate():
            cursor = since
            while True:
                with session.lock:
                    pending = session.events[cursor:]
                for event in pending:
                    yield f"data: {json.dumps(_filter_event(event, view))}\n\n"
                    cursor += 1
                if session.status != "running":
                    yield f"data: {json.dumps({'kind': 'stream_end', 'status': session.status})}\n\n"
                    return
                with session.new_event:
                    session.new_event.wait(timeout=1.0)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/metrics")
    def metrics(pivot: bool = False):
        traces = store.list_traces()
        if pivot:
            return condition_pivot(traces, scenario_ratio_table(store.scenarios))
        return metrics_report(traces)

    @app.get("/scenarios")
    def scenarios():
        return {
            sid: {
                "ratio": ratio,
            }
            for sid, ratio in scenario_ratio_table(store.scenarios).items()
        }

    return app


def serve(store_root: str, host: str = "127.0.0.1", port: int = 8008) -> None:
    import uvicorn

    from .core import load_builtin_scenarios

    scenarios = load_builtin_scenarios()
    extra = TraceStore(store_root, scenarios)
    app = create_app(extra)
    uvicorn.run(app, host=host, port=port)
