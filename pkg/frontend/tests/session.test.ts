import { describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { SeatSession } from "../src/session.js";
import { GameState } from "../src/types.js";

const STATE: GameState = {
  game_id: "g1",
  status: "running",
  awaiting: { seat: 0, phase: "cheap_talk" },
  num_rounds: 4,
  cheap_talk_turns: 5,
  constraints: {
    supply: { r1: 10, r2: 10, r3: 6 },
    unit_cost: { r1: 1, r2: 1.5, r3: 3 },
    budget: 18,
    max_types: 2,
  },
  projects: [{ name: "pa", requirements: { r1: 2 }, reward: 3 }],
};

function mockedSession(overrides: Partial<GameState> = {}) {
  const client = {
    gameState: vi.fn().mockResolvedValue({ ...STATE, ...overrides }),
    submitTurn: vi.fn().mockResolvedValue({ accepted: true, violations: [] }),
  } as unknown as ApiClient;
  return { client, session: new SeatSession(client, "g1", 0) };
}

describe("SeatSession", () => {
  it("derives my-turn / waiting / decision-due from the awaited seat", async () => {
    const { session } = mockedSession();
    await session.initialize();
    expect(session.turnState).toBe("my-turn");

    session.applyState({ ...STATE, awaiting: { seat: 1, phase: "cheap_talk" } });
    expect(session.turnState).toBe("waiting");

    session.applyState({ ...STATE, awaiting: { seat: 0, phase: "decision" } });
    expect(session.turnState).toBe("decision-due");

    session.applyState({ ...STATE, status: "done", awaiting: null });
    expect(session.turnState).toBe("settled");
  });

  it("builds the validator from the server payload, not constants", async () => {
    const { session } = mockedSession({
      constraints: { supply: { x: 3 }, unit_cost: { x: 2 }, budget: 4, max_types: 1 },
      projects: [],
    });
    await session.initialize();
    expect(session.validator!.validate({ quantities: { x: 2 } }).valid).toBe(true);
    expect(session.validator!.validate({ quantities: { x: 3 } }).valid).toBe(false);
    expect(session.validator!.validate({ quantities: { r1: 1 } }).valid).toBe(false);
  });

  it("refuses client-invalid purchases without calling the server", async () => {
    const { client, session } = mockedSession();
    await session.initialize();
    const result = await session.submitPurchase({ quantities: { r3: 12 } });
    expect(result.accepted).toBe(false);
    expect(result.violations.length).toBeGreaterThan(0);
    expect((client.submitTurn as ReturnType<typeof vi.fn>).mock.calls).toHaveLength(0);
  });

  it("sends valid purchases in flat wire format", async () => {
    const { client, session } = mockedSession();
    await session.initialize();
    const result = await session.submitPurchase({
      quantities: { r1: 10 },
      runs: { pa: 5 },
    });
    expect(result.accepted).toBe(true);
    expect(client.submitTurn).toHaveBeenCalledWith("g1", {
      seat: 0,
      action: { r1: 10, projects: { pa: 5 } },
    });
  });

  it("tracks talk turns and the transcript from the event feed", async () => {
    const { session } = mockedSession();
    await session.initialize();
    expect(session.remainingTalkTurns()).toBe(5);

    session.applyEvent({ kind: "turn", seq: 0, round: 1, speaker: 0, speech: "hi", phase: "cheap_talk" });
    session.applyEvent({ kind: "turn", seq: 1, round: 1, speaker: 1, speech: "yo", phase: "cheap_talk" });
    expect(session.remainingTalkTurns()).toBe(4); // only own turns consume the limit
    expect(session.transcript.map((t) => `${t.speaker}:${t.text}`)).toEqual([
      "you:hi",
      "opponent:yo",
    ]);

    session.applyEvent({
      kind: "round_settled",
      seq: 2,
      round: 1,
      outcome: { annulled: false, rewards: [15, 15] },
    });
    expect(session.remainingTalkTurns()).toBe(5); // resets each round
    expect(session.transcript.at(-1)!.text).toContain("your reward: 15");

    session.applyEvent({
      kind: "round_settled",
      seq: 3,
      round: 2,
      outcome: { annulled: true, rewards: [0, 0] },
    });
    expect(session.transcript.at(-1)!.text).toContain("ANNULLED");

    session.applyEvent({ kind: "game_over", seq: 4 });
    expect(session.turnState).toBe("settled");
  });

  it("reports unlimited talk turns when the limit is zero", async () => {
    const { session } = mockedSession({ cheap_talk_turns: 0 });
    await session.initialize();
    expect(session.remainingTalkTurns()).toBeNull();
  });
});
