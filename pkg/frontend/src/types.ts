/** Wire types mirrored from the HTTP API. All state is server-derived. */

export interface Constraints {
  supply: Record<string, number>;
  unit_cost: Record<string, number>;
  budget: number;
  max_types: number;
}

export interface Project {
  name: string;
  requirements: Record<string, number>;
  reward: number;
}

export interface GameState {
  game_id: string;
  status: "running" | "done" | "error";
  awaiting: { seat: number; phase: "cheap_talk" | "decision" } | null;
  num_rounds: number;
  cheap_talk_turns: number;
  constraints: Constraints;
  projects?: Project[];
}

/** A purchase on the wire: resource name -> units, plus an optional
 * project-run map under the reserved "projects" key. */
export type PurchaseWire = Record<string, number | Record<string, number>>;

export interface Purchase {
  quantities: Record<string, number>;
  runs?: Record<string, number>;
}

export interface TurnSubmission {
  seat: number;
  speech?: string;
  action?: PurchaseWire;
}

export interface Verdict {
  valid: boolean;
  violations: string[];
}

export interface SubmitResult {
  accepted: boolean;
  violations: string[];
}

export interface GameEvent {
  kind: string;
  seq: number;
  [key: string]: unknown;
}

export interface EventPage {
  events: GameEvent[];
  next: number;
  status: string;
}

export interface GameSummary {
  game_id: string;
  status: string;
  error: string | null;
  events: number;
}

export interface RoundOutcome {
  annulled: boolean;
  rewards: [number, number];
  joint_reward: number;
  efficiency: number | null;
}

export interface TurnView {
  round_number: number;
  turn_index: number;
  speaker: number;
  thinking: string;
  speech: string;
  phase: string;
}

export interface RoundView {
  round_number: number;
  scenario_id: string;
  turns: TurnView[];
  decisions: [PurchaseWire, PurchaseWire];
  outcome: RoundOutcome;
}

export interface TraceView {
  game_id: string;
  rounds: RoundView[];
  cumulative_rewards: [number, number];
  agent_names: [string, string];
  reflections: [string | null, string | null];
}

export function toWire(purchase: Purchase): PurchaseWire {
  const wire: PurchaseWire = { ...purchase.quantities };
  if (purchase.runs !== undefined) wire.projects = { ...purchase.runs };
  return wire;
}
