/** State machine for one browser-held seat. All turn arbitration is
 * server-side; this class only derives a view state from server payloads and
 * guards submissions with the mirrored validator. */

import { ApiClient } from "./api.js";
import { PurchaseValidator } from "./validator.js";
import {
  GameEvent,
  GameState,
  Purchase,
  SubmitResult,
  toWire,
} from "./types.js";

export type TurnState = "my-turn" | "decision-due" | "waiting" | "settled";

export interface TranscriptEntry {
  round: number;
  speaker: string;
  text: string;
  kind: "speech" | "result" | "notice";
}

export class SeatSession {
  turnState: TurnState = "waiting";
  transcript: TranscriptEntry[] = [];
  lastViolations: string[] = [];
  scratch: Purchase = { quantities: {} };
  validator: PurchaseValidator | null = null;
  talkTurnsUsed = 0;
  private talkLimit = 0;
  private currentRound = 1;

  constructor(
    private readonly client: ApiClient,
    public readonly gameId: string,
    public readonly seat: number,
  ) {}

  /** Pull constraints and projects once at game start; the validator is
   * generated from this payload, never from constants. */
  async initialize(): Promise<GameState> {
    const state = await this.client.gameState(this.gameId, this.seat);
    this.validator = new PurchaseValidator(state.constraints, state.projects ?? []);
    this.talkLimit = state.cheap_talk_turns;
    this.applyState(state);
    return state;
  }

  applyState(state: GameState): void {
    if (state.status !== "running") {
      this.turnState = "settled";
      return;
    }
    if (state.awaiting === null || state.awaiting.seat !== this.seat) {
      this.turnState = "waiting";
    } else {
      this.turnState = state.awaiting.phase === "decision" ? "decision-due" : "my-turn";
    }
  }

  /** Fold a spectator-filtered event into the visible transcript. Payloads
   * are already privacy-filtered server-side; nothing here re-adds thinking. */
  applyEvent(event: GameEvent): void {
    switch (event.kind) {
      case "turn": {
        const speaker = event.speaker === this.seat ? "you" : "opponent";
        const speech = (event.speech as string) ?? "";
        if (speech) {
          this.transcript.push({
            round: (event.round as number) ?? this.currentRound,
            speaker,
            text: speech,
            kind: "speech",
          });
        }
        if (event.speaker === this.seat && event.phase === "cheap_talk") {
          this.talkTurnsUsed += 1;
        }
        break;
      }
      case "round_settled": {
        const outcome = event.outcome as {
          annulled: boolean;
          rewards: [number, number];
        };
        const text = outcome.annulled
          ? "Round ANNULLED (total demand exceeded supply); both receive 0."
          : `Round settled; your reward: ${outcome.rewards[this.seat]}.`;
        this.transcript.push({
          round: (event.round as number) ?? this.currentRound,
          speaker: "table",
          text,
          kind: "result",
        });
        this.currentRound = ((event.round as number) ?? this.currentRound) + 1;
        this.talkTurnsUsed = 0;
        break;
      }
      case "game_over":
        this.turnState = "settled";
        break;
    }
  }

  remainingTalkTurns(): number | null {
    if (this.talkLimit === 0) return null; // unlimited
    return Math.max(0, this.talkLimit - this.talkTurnsUsed);
  }

  async submitSpeech(speech: string): Promise<SubmitResult> {
    const result = await this.client.submitTurn(this.gameId, {
      seat: this.seat,
      speech,
    });
    this.lastViolations = result.violations;
    return result;
  }

  /** Guarded submission: the mirrored validator refuses inline first, so any
   * purchase this method actually sends must also be server-valid. */
  async submitPurchase(purchase: Purchase): Promise<SubmitResult> {
    if (this.validator === null) throw new Error("session not initialized");
    const verdict = this.validator.validate(purchase);
    if (!verdict.valid) {
      this.lastViolations = verdict.violations;
      return { accepted: false, violations: verdict.violations };
    }
    const result = await this.client.submitTurn(this.gameId, {
      seat: this.seat,
      action: toWire(purchase),
    });
    this.lastViolations = result.violations;
    return result;
  }
}
