/** HTML renderers. Pure string templates over server-derived payloads so the
 * privacy and content rules are testable without a DOM. */

import { SeatSession } from "./session.js";
import {
  Constraints,
  GameState,
  GameSummary,
  Project,
  RoundView,
  TraceView,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderConstraints(constraints: Constraints): string {
  const rows = Object.keys(constraints.supply)
    .map(
      (resource) =>
        `<tr><td>${escapeHtml(resource)}</td>` +
        `<td>${constraints.supply[resource]}</td>` +
        `<td>${constraints.unit_cost[resource]}</td></tr>`,
    )
    .join("");
  return (
    `<table class="constraints"><thead><tr><th>resource</th><th>supply</th><th>unit cost</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<p>Budget: ${constraints.budget} &middot; max ${constraints.max_types} resource types</p>`
  );
}

export function renderProjects(projects: Project[]): string {
  const items = projects
    .map((project) => {
      const needs = Object.entries(project.requirements)
        .map(([resource, quantity]) => `${quantity} ${escapeHtml(resource)}`)
        .join(", ");
      return `<li><b>${escapeHtml(project.name)}</b>: needs ${needs} per run, pays ${project.reward}</li>`;
    })
    .join("");
  return `<ul class="projects">${items}</ul>`;
}

/** The purchase builder: one numeric stepper per resource plus one run
 * selector per project; live budget/type totals are filled in by main.ts. */
export function renderPurchaseBuilder(constraints: Constraints, projects: Project[]): string {
  const steppers = Object.keys(constraints.supply)
    .map(
      (resource) =>
        `<label>${escapeHtml(resource)} ` +
        `<input type="number" min="0" step="1" value="0" data-resource="${escapeHtml(resource)}"></label>`,
    )
    .join("");
  const runs = projects
    .map(
      (project) =>
        `<label>${escapeHtml(project.name)} runs ` +
        `<input type="number" min="0" step="1" value="0" data-project="${escapeHtml(project.name)}"></label>`,
    )
    .join("");
  return (
    `<fieldset class="builder"><legend>Purchase</legend>${steppers}` +
    `<fieldset class="runs"><legend>Project runs (optional)</legend>${runs}</fieldset>` +
    `<p class="budget-meter" data-role="budget"></p>` +
    `<ul class="violations" data-role="violations"></ul></fieldset>`
  );
}

export function renderTranscript(session: SeatSession): string {
  const lines = session.transcript
    .map(
      (entry) =>
        `<li class="${entry.kind}">[r${entry.round}] <b>${escapeHtml(entry.speaker)}</b>: ` +
        `${escapeHtml(entry.text)}</li>`,
    )
    .join("");
  return `<ol class="transcript">${lines}</ol>`;
}

export function renderPlayView(session: SeatSession, state: GameState): string {
  const remaining = session.remainingTalkTurns();
  const talkNote =
    remaining === null ? "unlimited talk turns" : `${remaining} talk turns left`;
  const banner = {
    "my-turn": `Your turn — speak or finalize (${talkNote}).`,
    "decision-due": "Decision due — submit your final purchase.",
    waiting: "Waiting for the other party…",
    settled: "Game over.",
  }[session.turnState];
  return (
    `<section class="play">` +
    `<h2>Game ${escapeHtml(session.gameId)} — seat ${session.seat === 0 ? "A" : "B"}</h2>` +
    `<p class="status">${banner}</p>` +
    renderConstraints(state.constraints) +
    renderProjects(state.projects ?? []) +
    renderTranscript(session) +
    renderPurchaseBuilder(state.constraints, state.projects ?? []) +
    `<textarea data-role="speech" placeholder="cheap talk…"></textarea>` +
    `<button data-role="send-speech">Send message</button>` +
    `<button data-role="finalize">Finalize purchase</button>` +
    `</section>`
  );
}

export function renderRound(round: RoundView): string {
  const turns = round.turns
    .map((turn) => {
      const who = turn.speaker === 0 ? "A" : "B";
      const thinking = turn.thinking
        ? `<div class="thinking">${escapeHtml(turn.thinking)}</div>`
        : "";
      return `<li>${who}: ${escapeHtml(turn.speech)}${thinking}</li>`;
    })
    .join("");
  const outcome = round.outcome.annulled
    ? "ANNULLED (total demand exceeded supply); both receive 0."
    : `rewards A=${round.outcome.rewards[0]} B=${round.outcome.rewards[1]}` +
      ` (efficiency ${round.outcome.efficiency ?? "n/a"})`;
  return (
    `<article class="round"><h4>Round ${round.round_number}</h4>` +
    `<ol>${turns}</ol>` +
    `<p>A bid ${escapeHtml(JSON.stringify(round.decisions[0]))}, ` +
    `B bid ${escapeHtml(JSON.stringify(round.decisions[1]))}</p>` +
    `<p class="outcome">${outcome}</p></article>`
  );
}

export function renderTraceBrowser(trace: TraceView): string {
  const rounds = trace.rounds.map(renderRound).join("");
  return (
    `<section class="trace"><h3>${escapeHtml(trace.agent_names[0])} vs ` +
    `${escapeHtml(trace.agent_names[1])}</h3>${rounds}` +
    `<p>Cumulative: A=${trace.cumulative_rewards[0]} B=${trace.cumulative_rewards[1]}</p></section>`
  );
}

export function renderGameTable(games: GameSummary[]): string {
  const rows = games
    .map(
      (game) =>
        `<tr data-game="${escapeHtml(game.game_id)}"><td>${escapeHtml(game.game_id)}</td>` +
        `<td>${escapeHtml(game.status)}</td><td>${game.events}</td>` +
        `<td>${escapeHtml(game.error ?? "")}</td></tr>`,
    )
    .join("");
  return (
    `<table class="games"><thead><tr><th>game</th><th>status</th>` +
    `<th>events</th><th>error</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

interface RateCell {
  numerator: number;
  denominator: number;
  value: number | null;
}

function fmtRate(rate: RateCell | undefined): string {
  if (!rate || rate.value === null || rate.value === undefined) return "—";
  return `${rate.value.toFixed(2)} (${rate.numerator}/${rate.denominator})`;
}

/** Per-condition metrics pivot: one row per condition cell, the headline
 * rate columns the dashboard tracks while a grid accrues. */
export function renderMetricsPivot(pivot: Record<string, Record<string, unknown>>): string {
  const columns = ["optimum_rate", "overdraw_rate", "win_stay", "early_decision_rate_round"];
  const rows = Object.entries(pivot)
    .map(([condition, report]) => {
      const cells = columns
        .map((column) => `<td>${fmtRate(report[column] as RateCell)}</td>`)
        .join("");
      return `<tr><td>${escapeHtml(condition)}</td>${cells}</tr>`;
    })
    .join("");
  return (
    `<table class="metrics"><thead><tr><th>condition</th>` +
    columns.map((column) => `<th>${column}</th>`).join("") +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderLaunchForm(scenarioIds: string[]): string {
  const options = scenarioIds
    .map((sid) => `<option value="${escapeHtml(sid)}">${escapeHtml(sid)}</option>`)
    .join("");
  return (
    `<form class="launch" data-role="launch">` +
    `<select multiple data-role="scenarios">${options}</select>` +
    `<label>stabilities <input data-role="stabilities" value="stable"></label>` +
    `<label>rotations <input data-role="rotations" value="fixed"></label>` +
    `<label>repetitions <input data-role="repetitions" type="number" value="1" min="1"></label>` +
    `<button type="submit">Launch grid</button></form>`
  );
}
