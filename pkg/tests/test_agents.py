import json

import pytest

from negolab.agents import (
    AgentErrorEvent,
    AgentResponse,
    ModelBinding,
    ParseError,
    RateLimitError,
    RetryPolicy,
    ScriptedGreedyAgent,
    ScriptedOracleAgent,
    ZERO_PURCHASE,
    decide_with_retries,
    llm_chat,
    load_bindings,
    parse_agent_response,
)
from negolab.core import DEFAULT_ENV, Purchase, validate_purchase


class TestParseThinkingMode:
    def test_continue_talking(self):
        raw = '{"thinking": "hmm", "speech": "hi", "action": null}'
        r = parse_agent_response(raw)
        assert r.speech == "hi"
        assert r.action is None
        assert not r.finalizes

    def test_finalization_with_projects(self):
        raw = json.dumps(
            {
                "thinking": "done",
                "speech": "gl",
                "action": {"wood": 5, "stone": 2, "projects": {"project_a": 1}},
            }
        )
        r = parse_agent_response(raw)
        assert r.action == Purchase({"wood": 5, "stone": 2}, runs={"project_a": 1})

    def test_missing_field_fails(self):
        with pytest.raises(ParseError, match="thinking"):
            parse_agent_response('{"speech": "hi", "action": null}')

    def test_extra_field_fails(self):
        with pytest.raises(ParseError, match="unexpected"):
            parse_agent_response(
                '{"thinking": "", "speech": "x", "action": null, "mood": "?"}'
            )

    def test_empty_speech_fails(self):
        with pytest.raises(ParseError, match="speech"):
            parse_agent_response('{"thinking": "t", "speech": "  ", "action": null}')

    def test_code_fences_tolerated(self):
        raw = '```json\n{"thinking": "t", "speech": "s", "action": null}\n```'
        assert parse_agent_response(raw).speech == "s"

    def test_non_object_action_fails(self):
        with pytest.raises(ParseError, match="action"):
            parse_agent_response('{"thinking": "t", "speech": "s", "action": [1]}')

    def test_malformed_json_fails(self):
        with pytest.raises(ParseError, match="malformed"):
            parse_agent_response("not json at all")


class TestParseNoThinkingMode:
    def test_plain_text_is_speech(self):
        r = parse_agent_response("I want the stone.", mode="no_thinking")
        assert r.speech == "I want the stone."
        assert r.action is None

    def test_bare_json_object_is_finalization(self):
        r = parse_agent_response('{"stone": 4, "projects": {"project_a": 2}}', mode="no_thinking")
        assert r.action == Purchase({"stone": 4}, runs={"project_a": 2})
        assert r.speech == ""

    def test_empty_message_fails(self):
        with pytest.raises(ParseError):
            parse_agent_response("   ", mode="no_thinking")


def _validator(p: Purchase):
    return validate_purchase(p, DEFAULT_ENV, [])


class TestDecideWithRetries:
    def _chat_sequence(self, replies):
        replies = iter(replies)

        def chat(messages):
            return next(replies), {}

        return chat

    def test_first_attempt_valid_no_events(self):
        chat = self._chat_sequence(['{"thinking": "t", "speech": "s", "action": null}'])
        response, events = decide_with_retries(chat, [], "thinking", "cheap_talk", 1, _validator)
        assert events == []
        assert response.speech == "s"

    def test_two_malformed_then_valid(self):
        chat = self._chat_sequence(
            ["junk", "{}", '{"thinking": "t", "speech": "ok", "action": null}']
        )
        response, events = decide_with_retries(chat, [], "thinking", "cheap_talk", 1, _validator)
        assert response.speech == "ok"
        assert len(events) == 2
        assert all(e.kind == "output_format_warning" for e in events)

    def test_validation_failure_reprompts_with_reason(self):
        transcripts = []

        def chat(messages):
            transcripts.append(list(messages))
            if len(transcripts) == 1:
                return (
                    '{"thinking": "", "speech": "x", "action": {"r1": 99}}',
                    {},
                )
            return '{"thinking": "", "speech": "x", "action": {"r1": 5}}', {}

        response, events = decide_with_retries(chat, [], "thinking", "decision", 2, _validator)
        assert response.action == Purchase({"r1": 5})
        assert any(e.kind == "validation_error" for e in events)
        reprompt = transcripts[1][-1]["content"]
        assert "budget" in reprompt

    def test_exhaustion_in_decision_phase_auto_fills_zero(self):
        chat = self._chat_sequence(["junk"] * 4)
        response, events = decide_with_retries(
            chat, [], "thinking", "decision", 3, _validator, max_retries=3
        )
        assert response.action == ZERO_PURCHASE
        kinds = [e.kind for e in events]
        assert kinds.count("output_format_warning") == 4
        assert "heuristic_fallback" in kinds
        assert "decision_auto_filled" in kinds

    def test_decision_phase_rejects_null_action(self):
        chat = self._chat_sequence(
            [
                '{"thinking": "", "speech": "still talking", "action": null}',
                '{"thinking": "", "speech": "fine", "action": {"r1": 1}}',
            ]
        )
        response, events = decide_with_retries(chat, [], "thinking", "decision", 1, _validator)
        assert response.action == Purchase({"r1": 1})
        assert len(events) == 1

    def test_accepted_purchase_always_passes_validator(self):
        # validator-loop soundness: whatever comes back, it validates
        chat = self._chat_sequence(
            ['{"thinking": "", "speech": "x", "action": {"r2": 10}}']
        )
        response, _ = decide_with_retries(chat, [], "thinking", "decision", 1, _validator)
        assert _validator(response.action) == []


class TestBindings:
    def test_catalog_loads(self):
        bindings = load_bindings()
        assert len(bindings) >= 7
        assert all(isinstance(b, ModelBinding) for b in bindings.values())

    def test_reasoning_binding_omits_temperature(self):
        bindings = load_bindings()
        assert any(b.temperature is None for b in bindings.values())

    def test_retry_policy_invariants(self):
        with pytest.raises(ValueError):
            RetryPolicy(max_json_retries=-1)
        with pytest.raises(ValueError):
            RetryPolicy(backoff_base_s=5.0, backoff_cap_s=1.0)


class TestLLMChatRetry:
    def test_rate_limit_backoff_then_success(self, monkeypatch):
        import negolab.agents as agents_mod

        sleeps = []
        monkeypatch.setattr(agents_mod.time, "sleep", lambda s: sleeps.append(s))
        calls = []

        def transport(binding, messages):
            calls.append(1)
            if len(calls) < 3:
                raise RateLimitError("429")
            return "ok", {"prompt_tokens": 1}

        binding = ModelBinding("test", "anthropic", "m", retry=RetryPolicy(cooldown_s=0))
        text, meta, events = llm_chat(binding, [], transport=transport)
        assert text == "ok"
        assert len(calls) == 3
        assert [e.kind for e in events] == ["rate_limit", "rate_limit"]
        # exponential backoff: base 2s then 4s
        assert sleeps[-2:] == [2.0, 4.0]

    def test_rate_limit_exhaustion_raises(self, monkeypatch):
        import negolab.agents as agents_mod

        monkeypatch.setattr(agents_mod.time, "sleep", lambda s: None)

        def transport(binding, messages):
            raise RateLimitError("429")

        binding = ModelBinding(
            "test", "anthropic", "m",
            retry=RetryPolicy(max_rate_limit_retries=2, cooldown_s=0),
        )
        with pytest.raises(RateLimitError):
            llm_chat(binding, [], transport=transport)

    def test_backoff_capped(self):
        policy = RetryPolicy()
        delays = [min(policy.backoff_base_s * 2**i, policy.backoff_cap_s) for i in range(10)]
        assert max(delays) == 120.0


class TestScriptedAgents:
    def test_oracle_agent_announces_then_finalizes(self, tiny_scenario):
        agent = ScriptedOracleAgent(0, tiny_scenario)
        agent.begin_round(1, tiny_scenario)
        first, _ = agent.take_turn([], "cheap_talk", 1, _validator)
        assert first.action is None
        assert first.speech
        second, _ = agent.take_turn([], "cheap_talk", 1, _validator)
        assert second.action.quantities == {"r1": 10}
        assert second.action.runs == {"pa": 5}

    def test_oracle_agent_no_talk_plays_silently(self, tiny_scenario):
        agent = ScriptedOracleAgent(1, tiny_scenario)
        agent.begin_round(1, tiny_scenario)
        response, _ = agent.take_turn([], "decision", 1, _validator)
        assert response.action.quantities == {"r2": 10}
        assert response.action.runs == {"pb": 5}

    def test_greedy_agent_finalizes_immediately(self, gen_012):
        agent = ScriptedGreedyAgent(0, gen_012)
        agent.begin_round(1, gen_012)
        response, _ = agent.take_turn([], "cheap_talk", 1, _validator)
        assert response.action is not None
        assert response.action.quantities == {"r2": 9}

    def test_scripted_agents_deterministic(self, gen_012):
        runs = []
        for _ in range(2):
            agent = ScriptedGreedyAgent(1, gen_012)
            agent.begin_round(1, gen_012)
            response, _ = agent.take_turn([], "decision", 1, _validator)
            runs.append(response.action)
        assert runs[0] == runs[1]

    def test_oracle_agent_requires_witnesses(self, gen_012):
        from dataclasses import replace

        bare = replace(gen_012, oracle=None)
        with pytest.raises(ValueError):
            ScriptedOracleAgent(0, bare)
