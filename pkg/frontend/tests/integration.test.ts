/** End-to-end against a live backend: spawns the Python service as a child
 * process and drives a full human-vs-oracle game plus a validator cross-check
 * entirely through the HTTP API. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient } from "../src/api.js";
import { SeatSession } from "../src/session.js";
import { PurchaseValidator } from "../src/validator.js";
import { GameState, Purchase, toWire } from "../src/types.js";

const PORT = 8970 + (process.pid % 40);
const BASE = `http://127.0.0.1:${PORT}`;
const STORE = mkdtempSync(join(tmpdir(), "console-it-"));

let server: ChildProcess;

async function waitForServer(): Promise<void> {
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/scenarios`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("backend did not come up");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "negolab.cli", "serve", "--store", STORE, "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 40_000);

afterAll(() => {
  server?.kill();
});

const client = new ApiClient(BASE);

async function waitForSeat(gameId: string, seat: number): Promise<GameState> {
  const deadline = Date.now() + 20_000;
  while (Date.now() < deadline) {
    const state = await client.gameState(gameId, seat);
    if (state.status !== "running" || state.awaiting?.seat === seat) return state;
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  throw new Error("seat never came up");
}

/** Pick a client-valid single-resource purchase from the live constraint
 * payload — the whole point is that the form never needs hardcoded rules. */
function affordablePurchase(validator: PurchaseValidator, state: GameState): Purchase {
  for (const [resource, supply] of Object.entries(state.constraints.supply)) {
    for (let units = supply; units > 0; units--) {
      const candidate: Purchase = { quantities: { [resource]: units } };
      if (validator.validate(candidate).valid) return candidate;
    }
  }
  throw new Error("no affordable purchase found");
}

describe("console against a live backend", () => {
  it(
    "a human completes a full 4-round game against the scripted oracle",
    async () => {
      const { game_id } = await client.launchGame(
        { scenario_ids: ["gen_000_c10"], num_rounds: 4 },
        [{ type: "human" }, { type: "scripted_oracle" }],
      );
      const session = new SeatSession(client, game_id, 0);
      const state = await session.initialize();
      expect(state.num_rounds).toBe(4);
      expect(state.projects!.length).toBeGreaterThan(0);

      for (let round = 1; round <= 4; round++) {
        await waitForSeat(game_id, 0);
        const speech = await session.submitSpeech(`round ${round}: I will buy r1.`);
        expect(speech.accepted).toBe(true);
        await waitForSeat(game_id, 0);
        const purchase = affordablePurchase(session.validator!, state);
        const result = await session.submitPurchase(purchase);
        expect(result.accepted).toBe(true);
        expect(result.violations).toEqual([]);
      }

      const deadline = Date.now() + 20_000;
      let final = await client.gameState(game_id);
      while (final.status === "running" && Date.now() < deadline) {
        await new Promise((resolve) => setTimeout(resolve, 100));
        final = await client.gameState(game_id);
      }
      expect(final.status).toBe("done");

      const trace = await client.trace(game_id, "seat_a");
      expect(trace.rounds).toHaveLength(4);
      expect(trace.rounds[0].turns.some((t) => t.speech.includes("I will buy r1"))).toBe(true);
      expect(trace.cumulative_rewards).toHaveLength(2);

      // The persisted trace passes the same integrity recheck as scripted
      // games, via the backend's own library.
      const diffs = execFileSync("python3", [
        "-c",
        [
          "import sys",
          "from negolab.core import load_builtin_scenarios",
          "from negolab.store import TraceStore, check_trace_consistency",
          `store = TraceStore(${JSON.stringify(STORE)}, load_builtin_scenarios())`,
          `trace = store.get_trace(${JSON.stringify(game_id)})`,
          "print(len(check_trace_consistency(trace, store.scenarios)))",
        ].join("\n"),
      ]).toString().trim();
      expect(diffs).toBe("0");

      // Spectator payloads never carry private thinking.
      const spectator = await client.trace(game_id, "spectator");
      for (const round of spectator.rounds) {
        for (const turn of round.turns) expect(turn.thinking).toBe("");
      }
      expect((spectator as unknown as Record<string, unknown>).seat_contexts).toBeUndefined();
      const page = await client.events(game_id, 0, "spectator");
      expect(page.events.length).toBeGreaterThan(0);
      for (const event of page.events) {
        expect(JSON.stringify(event)).not.toContain("thinking");
      }
    },
    60_000,
  );

  it(
    "client and server verdicts agree on a 50-vector shared test set",
    async () => {
      const { game_id } = await client.launchGame(
        { scenario_ids: ["gen_000_c10"], num_rounds: 1 },
        [{ type: "human" }, { type: "scripted_oracle" }],
      );
      const state = await client.gameState(game_id, 0);
      const validator = new PurchaseValidator(state.constraints, state.projects ?? []);
      const project = state.projects![0].name;

      const vectors: Purchase[] = [
        { quantities: {} },
        { quantities: { r1: 10 } },
        { quantities: { r2: 10 } },
        { quantities: { r3: 6 } },
        { quantities: { r1: 10, r2: 5 } },
        { quantities: { r1: 12 } }, // over supply but affordable: still valid
        { quantities: { r3: 12 } }, // over budget
        { quantities: { r1: 1, r2: 1, r3: 1 } }, // too many types
        { quantities: { r1: 1, r2: 1, r3: 0 } }, // zero entry doesn't count
        { quantities: { gold: 3 } }, // unknown resource
        { quantities: { r1: -1 } },
        { quantities: { r1: 2.5 } }, // form refuses; server truncates to 2 at parse

        { quantities: { r1: 2 }, runs: { [project]: 1 } },
        { quantities: { r1: 2 }, runs: { [project]: 40 } }, // uncovered runs
        { quantities: { r1: 2 }, runs: { nonexistent: 1 } },
      ];
      // Deterministic pseudo-random fill to 50 vectors.
      let seed = 12345;
      const rand = (n: number) => {
        seed = (seed * 1103515245 + 12345) % 2147483648;
        return seed % n;
      };
      const resources = Object.keys(state.constraints.supply);
      while (vectors.length < 50) {
        const quantities: Record<string, number> = {};
        const types = 1 + rand(3);
        for (let i = 0; i < types; i++) {
          quantities[resources[rand(resources.length)]] = rand(16) - 2;
        }
        const purchase: Purchase = { quantities };
        if (rand(3) === 0) purchase.runs = { [project]: rand(6) };
        vectors.push(purchase);
      }
      expect(vectors).toHaveLength(50);

      let clientValid = 0;
      for (const purchase of vectors) {
        const mine = validator.validate(purchase);
        const theirs = await client.validate(game_id, 0, toWire(purchase));
        // The hard guarantee: everything the form permits is server-valid.
        if (mine.valid) {
          clientValid++;
          expect(theirs.valid).toBe(true);
          expect(theirs.violations).toEqual([]);
        } else {
          // The form may additionally refuse fractional quantities, which
          // the server canonicalizes by truncation instead; everything else
          // must agree exactly.
          const fractional = Object.values(purchase.quantities).some(
            (q) => !Number.isInteger(q),
          );
          if (!fractional) expect(theirs.valid).toBe(false);
        }
      }
      // The agreement must be exercised in both directions.
      expect(clientValid).toBeGreaterThan(5);
      expect(clientValid).toBeLessThan(50);
    },
    60_000,
  );
});
