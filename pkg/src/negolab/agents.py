"""Agent seats: response parsing, retry policy, scripted references, LLM client.

The engine talks to seats through a small protocol; scripted agents are
deterministic test doubles, LLM seats wrap a provider-agnostic chat client
with the parse/validate/retry loop.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from .core import Purchase, Scenario


class ParseError(ValueError):
    """Agent output did not match the required response format (retriable)."""


@dataclass(frozen=True)
class AgentResponse:
    thinking: str
    speech: str
    action: Optional[Purchase] = None
    api_meta: Optional[dict] = None

    @property
    def finalizes(self) -> bool:
        return self.action is not None


@dataclass(frozen=True)
class AgentErrorEvent:
    kind: str  # validation_error | output_format_warning | rate_limit | heuristic_fallback | decision_auto_filled
    round_number: int
    attempt: int
    detail: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "round": self.round_number,
            "attempt": self.attempt,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class RetryPolicy:
    max_json_retries: int = 3
    max_rate_limit_retries: int = 10
    backoff_base_s: float = 2.0
    backoff_cap_s: float = 120.0
    cooldown_s: float = 1.0

    def __post_init__(self):
        if self.max_json_retries < 0 or self.max_rate_limit_retries < 0:
            raise ValueError("retry counts must be >= 0")
        if self.backoff_cap_s < self.backoff_base_s:
            raise ValueError("backoff cap must be >= base")


@dataclass(frozen=True)
class ModelBinding:
    binding_id: str
    provider: str
    model: str
    temperature: Optional[float] = None
    max_tokens: int = 8192
    json_suffix: bool = False
    retry: RetryPolicy = RetryPolicy()


def load_bindings() -> dict[str, ModelBinding]:
    path = Path(__file__).parent / "data" / "bindings.json"
    with open(path) as fh:
        raw = json.load(fh)
    return {
        bid: ModelBinding(
            binding_id=bid,
            provider=cfg["provider"],
            model=cfg["model"],
            temperature=cfg.get("temperature"),
            max_tokens=cfg.get("max_tokens", 8192),
            json_suffix=cfg.get("json_suffix", False),
        )
        for bid, cfg in raw.items()
    }


# --- response parsing -------------------------------------------------------

_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$")


def _strip_fences(raw: str) -> str:
    return _FENCE.sub("", raw.strip()).strip()


def parse_agent_response(raw: str, mode: str = "thinking") -> AgentResponse:
    """Parse one raw agent reply.

    Thinking mode requires a strict JSON object with exactly the fields
    thinking / speech / action; code fences and surrounding whitespace are
    tolerated, nothing else. No-thinking mode treats a bare JSON object as a
    finalization and anything else as plain-text speech.
    """
    if mode == "no_thinking":
        text = _strip_fences(raw)
        if text.startswith("{"):
            try:
                payload = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON purchase: {exc}") from exc
            if not isinstance(payload, dict):
                raise ParseError("purchase must be a JSON object")
            return AgentResponse(thinking="", speech="", action=Purchase.from_dict(payload))
        if not raw.strip():
            raise ParseError("empty message")
        return AgentResponse(thinking="", speech=raw.strip(), action=None)

    text = _strip_fences(raw)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError("response must be a JSON object")
    expected = {"thinking", "speech", "action"}
    missing = expected - payload.keys()
    if missing:
        raise ParseError(f"missing {', '.join(sorted(missing))}")
    extra = payload.keys() - expected
    if extra:
        raise ParseError(f"unexpected fields: {', '.join(sorted(extra))}")
    thinking, speech, action = payload["thinking"], payload["speech"], payload["action"]
    if not isinstance(thinking, str) or not isinstance(speech, str):
        raise ParseError("thinking and speech must be strings")
    if not speech.strip():
        raise ParseError("speech must not be empty")
    if action is None:
        parsed_action = None
    elif isinstance(action, dict):
        parsed_action = Purchase.from_dict(action)
    else:
        raise ParseError("action must be null or a purchase object")
    return AgentResponse(thinking=thinking, speech=speech, action=parsed_action)


# --- seat protocol ----------------------------------------------------------


class Agent(Protocol):
    """One seat's driver. The engine owns the message history and phases."""

    def begin_round(self, round_number: int, scenario: Scenario) -> None: ...

    def take_turn(
        self,
        messages: Sequence[dict],
        phase: str,  # "cheap_talk" | "decision"
        round_number: int,
        validator: Callable[[Purchase], list[str]],
    ) -> tuple[AgentResponse, list[AgentErrorEvent]]: ...

    def reflect(self, messages: Sequence[dict]) -> str: ...


ZERO_PURCHASE = Purchase({})


@dataclass
class ScriptedOracleAgent:
    """Announces and plays its half of the lexicographically-first optimal pair."""

    seat: int
    scenario: Scenario
    _turns_taken: int = 0

    def __post_init__(self):
        if self.scenario.oracle is None or not self.scenario.oracle.optimal_joint_allocations:
            raise ValueError("scripted oracle agent needs an oracle annotation with witnesses")

    def _target(self) -> Purchase:
        from . import oracle

        pair = self.scenario.oracle.optimal_joint_allocations[0]
        quantities = dict(pair[self.seat].quantities)
        # Submit the optimal run assignment explicitly; greedy auto-assign in
        # presentation order may realize less than the witness reward.
        _, runs = oracle.best_reward_for_quantities(
            quantities, self.scenario.projects_for(self.seat), self.scenario.env
        )
        return Purchase(quantities, runs=runs)

    def begin_round(self, round_number: int, scenario: Scenario) -> None:
        self.scenario = scenario
        self._turns_taken = 0

    def take_turn(self, messages, phase, round_number, validator):
        target = self._target()
        alloc = json.dumps(dict(sorted(target.quantities.items())))
        self._turns_taken += 1
        if phase == "decision" or self._turns_taken >= 2:
            return (
                AgentResponse(
                    thinking=f"Playing my half of the optimal pair: {alloc}.",
                    speech="Finalizing as announced.",
                    action=target,
                ),
                [],
            )
        return (
            AgentResponse(
                thinking="Announcing my half of a jointly optimal allocation.",
                speech=f"I will buy exactly {alloc}; the rest of the supply is yours.",
                action=None,
            ),
            [],
        )

    def reflect(self, messages):
        return "Played a precomputed optimal allocation every round."


@dataclass
class ScriptedGreedyAgent:
    """Plays the lexicographically-first individual optimum, ignoring all talk."""

    seat: int
    scenario: Scenario

    def _target(self) -> Purchase:
        from . import oracle

        _, witnesses = oracle.individual_optimum(self.seat, self.scenario)
        quantities = dict(witnesses[0].quantities)
        _, runs = oracle.best_reward_for_quantities(
            quantities, self.scenario.projects_for(self.seat), self.scenario.env
        )
        return Purchase(quantities, runs=runs)

    def begin_round(self, round_number: int, scenario: Scenario) -> None:
        self.scenario = scenario

    def take_turn(self, messages, phase, round_number, validator):
        return (
            AgentResponse(
                thinking="Taking my individual optimum regardless of the other party.",
                speech="Good luck.",
                action=self._target(),
            ),
            [],
        )

    def reflect(self, messages):
        return "Maximized individually every round."


# --- LLM chat client --------------------------------------------------------

_ENV_KEYS = {
    "anthropic": "ANTHROPIC_API_KEY",
    "openai": "OPENAI_API_KEY",
    "openrouter": "OPENROUTER_API_KEY",
    "google": "GOOGLE_API_KEY",
}

_dispatch_locks: dict[str, threading.Lock] = {}
_last_call: dict[str, float] = {}
_dispatch_guard = threading.Lock()


class TransportError(RuntimeError):
    pass


class RateLimitError(TransportError):
    pass


def _provider_lock(provider: str) -> threading.Lock:
    with _dispatch_guard:
        if provider not in _dispatch_locks:
            _dispatch_locks[provider] = threading.Lock()
        return _dispatch_locks[provider]


def _request_once(binding: ModelBinding, messages: Sequence[dict]) -> tuple[str, dict]:
    import httpx

    key = os.environ.get(_ENV_KEYS.get(binding.provider, ""), "")
    if not key:
        raise TransportError(f"no API key configured for provider {binding.provider}")

    system = "\n\n".join(m["content"] for m in messages if m["role"] == "system")
    chat = [m for m in messages if m["role"] != "system"]

    if binding.provider == "anthropic":
        body: dict = {
            "model": binding.model,
            "max_tokens": binding.max_tokens,
            "system": system,
            "messages": chat,
        }
        if binding.temperature is not None:
            body["temperature"] = binding.temperature
        resp = httpx.post(
            "https://api.anthropic.com/v1/messages",
            json=body,
            headers={"x-api-key": key, "anthropic-version": "2023-06-01"},
            timeout=300,
        )
    else:
        base = {
            "openai": "https://api.openai.com/v1",
            "openrouter": "https://openrouter.ai/api/v1",
            "google": "https://generativelanguage.googleapis.com/v1beta/openai",
        }[binding.provider]
        body = {
            "model": binding.model,
            "messages": ([{"role": "system", "content": system}] if system else []) + chat,
        }
        # Reasoning-style models reject explicit temperature; omit when unset.
        if binding.temperature is not None:
            body["temperature"] = binding.temperature
        if binding.provider == "openai":
            body["max_completion_tokens"] = binding.max_tokens
        else:
            body["max_tokens"] = binding.max_tokens
        resp = httpx.post(
            f"{base}/chat/completions",
            json=body,
            headers={"Authorization": f"Bearer {key}"},
            timeout=300,
        )

    if resp.status_code == 429:
        raise RateLimitError(resp.text[:500])
    if resp.status_code >= 400:
        raise TransportError(f"HTTP {resp.status_code}: {resp.text[:500]}")
    data = resp.json()
    if binding.provider == "anthropic":
        text = "".join(b.get("text", "") for b in data.get("content", []))
        usage = data.get("usage", {})
        meta = {
            "prompt_tokens": usage.get("input_tokens"),
            "completion_tokens": usage.get("output_tokens"),
        }
    else:
        text = data["choices"][0]["message"]["content"] or ""
        usage = data.get("usage", {})
        meta = {
            "prompt_tokens": usage.get("prompt_tokens"),
            "completion_tokens": usage.get("completion_tokens"),
        }
    return text, meta


def llm_chat(
    binding: ModelBinding,
    messages: Sequence[dict],
    transport: Optional[Callable[[ModelBinding, Sequence[dict]], tuple[str, dict]]] = None,
) -> tuple[str, dict, list[AgentErrorEvent]]:
    """One chat completion with rate-limit backoff and per-provider cooldown."""
    call = transport or _request_once
    policy = binding.retry
    events: list[AgentErrorEvent] = []
    lock = _provider_lock(binding.provider)
    for attempt in range(policy.max_rate_limit_retries + 1):
        with lock:
            elapsed = time.monotonic() - _last_call.get(binding.provider, -1e9)
            if elapsed < policy.cooldown_s:
                time.sleep(policy.cooldown_s - elapsed)
            try:
                text, meta = call(binding, messages)
                return text, meta, events
            except RateLimitError as exc:
                events.append(AgentErrorEvent("rate_limit", -1, attempt + 1, str(exc)[:200]))
                if attempt == policy.max_rate_limit_retries:
                    raise
                delay = min(policy.backoff_base_s * 2**attempt, policy.backoff_cap_s)
            finally:
                _last_call[binding.provider] = time.monotonic()
        time.sleep(delay)
    raise TransportError("unreachable")


def decide_with_retries(
    chat: Callable[[Sequence[dict]], tuple[str, dict]],
    messages: list[dict],
    mode: str,
    phase: str,
    round_number: int,
    validator: Callable[[Purchase], list[str]],
    max_retries: int = 3,
) -> tuple[AgentResponse, list[AgentErrorEvent]]:
    """Parse/validate loop: re-prompt with the machine-readable failure reason.

    On exhaustion during a decision phase the zero purchase is substituted
    (heuristic_fallback + decision_auto_filled); outside a decision phase the
    turn degrades to silence-free continue-chatting.
    """
    events: list[AgentErrorEvent] = []
    working = list(messages)
    for attempt in range(max_retries + 1):
        raw, meta = chat(working)
        try:
            response = parse_agent_response(raw, mode)
            if phase == "decision" and response.action is None:
                raise ParseError('decision phase requires "action" to be a purchase object')
            if response.action is not None:
                violations = validator(response.action)
                if violations:
                    events.append(
                        AgentErrorEvent(
                            "validation_error", round_number, attempt + 1, "; ".join(violations)
                        )
                    )
                    raise _Invalid(violations)
            return (
                AgentResponse(response.thinking, response.speech, response.action, meta),
                events,
            )
        except ParseError as exc:
            events.append(
                AgentErrorEvent("output_format_warning", round_number, attempt + 1, str(exc))
            )
            reason = str(exc)
        except _Invalid as exc:
            reason = "; ".join(exc.violations)
        if attempt < max_retries:
            working = working + [
                {"role": "assistant", "content": raw},
                {
                    "role": "user",
                    "content": f"Your previous response was invalid: {reason}\n"
                    "Respond again, following the required format exactly.",
                },
            ]
    events.append(
        AgentErrorEvent("heuristic_fallback", round_number, max_retries + 1, "retries exhausted")
    )
    if phase == "decision":
        events.append(
            AgentErrorEvent(
                "decision_auto_filled", round_number, max_retries + 1, "zero allocation substituted"
            )
        )
        return (
            AgentResponse(thinking="", speech="(no valid response)", action=ZERO_PURCHASE),
            events,
        )
    return AgentResponse(thinking="", speech="(no valid response)", action=None), events


class _Invalid(Exception):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class LLMAgent:
    """LLM-backed seat: provider chat plus the retry loop."""

    seat: int
    binding: ModelBinding
    mode: str = "thinking"
    transport: Optional[Callable] = None

    def begin_round(self, round_number: int, scenario: Scenario) -> None:
        pass

    def _chat(self, messages):
        text, meta, _ = llm_chat(self.binding, messages, transport=self.transport)
        return text, meta

    def take_turn(self, messages, phase, round_number, validator):
        return decide_with_retries(
            self._chat, list(messages), self.mode, phase, round_number, validator,
            max_retries=self.binding.retry.max_json_retries,
        )

    def reflect(self, messages) -> str:
        text, _, _ = llm_chat(self.binding, messages, transport=self.transport)
        return text.strip()
