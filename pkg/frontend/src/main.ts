/** Browser entry point: wires the string-template views to the DOM. Kept
 * thin so everything interesting lives in testable modules. */

import { ApiClient, subscribeEvents } from "./api.js";
import { SeatSession } from "./session.js";
import { GameState, Purchase } from "./types.js";
import {
  renderGameTable,
  renderLaunchForm,
  renderMetricsPivot,
  renderPlayView,
  renderTraceBrowser,
} from "./views.js";

const baseUrl = (window as { NEGOLAB_API?: string }).NEGOLAB_API ?? "";
const client = new ApiClient(baseUrl);
const root = document.getElementById("app") as HTMLElement;

function readPurchase(container: HTMLElement): Purchase {
  const quantities: Record<string, number> = {};
  container.querySelectorAll<HTMLInputElement>("input[data-resource]").forEach((input) => {
    const n = Number(input.value || "0");
    if (n !== 0) quantities[input.dataset.resource as string] = n;
  });
  const runs: Record<string, number> = {};
  container.querySelectorAll<HTMLInputElement>("input[data-project]").forEach((input) => {
    const n = Number(input.value || "0");
    if (n !== 0) runs[input.dataset.project as string] = n;
  });
  const purchase: Purchase = { quantities };
  if (Object.keys(runs).length > 0) purchase.runs = runs;
  return purchase;
}

function showViolations(container: HTMLElement, violations: string[]): void {
  const list = container.querySelector("[data-role=violations]") as HTMLElement;
  list.innerHTML = violations.map((v) => `<li>${v}</li>`).join("");
}

async function playSeat(gameId: string, seat: number): Promise<void> {
  const session = new SeatSession(client, gameId, seat);
  const state: GameState = await session.initialize();

  const redraw = () => {
    root.innerHTML = renderPlayView(session, state);
    const speech = root.querySelector("[data-role=speech]") as HTMLTextAreaElement;
    root.querySelector("[data-role=send-speech]")?.addEventListener("click", async () => {
      await session.submitSpeech(speech.value);
      speech.value = "";
    });
    root.querySelector("[data-role=finalize]")?.addEventListener("click", async () => {
      const result = await session.submitPurchase(readPurchase(root));
      if (!result.accepted) showViolations(root, result.violations);
    });
    // Live budget meter while the builder is edited.
    const meter = root.querySelector("[data-role=budget]") as HTMLElement;
    root.querySelectorAll("input").forEach((input) =>
      input.addEventListener("input", () => {
        const purchase = readPurchase(root);
        const cost = session.validator?.costOf(purchase.quantities) ?? 0;
        meter.textContent = `Cost so far: ${cost} / ${state.constraints.budget}`;
        const verdict = session.validator?.validate(purchase);
        showViolations(root, verdict?.valid === false ? verdict.violations : []);
      }),
    );
  };

  subscribeEvents(
    client,
    baseUrl,
    gameId,
    seat === 0 ? "seat_a" : "seat_b",
    async (event) => {
      session.applyEvent(event);
      session.applyState(await client.gameState(gameId, seat));
      redraw();
    },
    async () => {
      session.turnState = "settled";
      root.innerHTML = renderTraceBrowser(
        await client.trace(gameId, seat === 0 ? "seat_a" : "seat_b"),
      );
    },
  );
  redraw();
}

async function dashboard(): Promise<void> {
  const [games, scenarios, metrics] = await Promise.all([
    client.listGames(),
    client.scenarios(),
    client.metrics(true).catch(() => ({})),
  ]);
  root.innerHTML =
    `<h2>Games</h2>` +
    renderGameTable(games) +
    `<h2>Launch</h2>` +
    renderLaunchForm(Object.keys(scenarios)) +
    `<h2>Metrics</h2>` +
    renderMetricsPivot(metrics as Record<string, Record<string, unknown>>);

  root.querySelectorAll("tr[data-game]").forEach((row) =>
    row.addEventListener("click", async () => {
      root.innerHTML = renderTraceBrowser(
        await client.trace(row.getAttribute("data-game") as string, "spectator"),
      );
    }),
  );
  const form = root.querySelector("[data-role=launch]") as HTMLFormElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const select = form.querySelector("[data-role=scenarios]") as HTMLSelectElement;
    const picked = Array.from(select.selectedOptions).map((o) => o.value);
    const field = (role: string) =>
      (form.querySelector(`[data-role=${role}]`) as HTMLInputElement).value;
    const experiment = await client.createExperiment(
      {
        scenario_ids: picked,
        stabilities: field("stabilities").split(",").map((s) => s.trim()),
        rotations: field("rotations").split(",").map((s) => s.trim()),
      },
      Number(field("repetitions")),
    );
    await client.launchExperiment(experiment.experiment_run_id, [
      { type: "scripted_oracle" },
      { type: "scripted_oracle" },
    ]);
    dashboard();
  });
}

const params = new URLSearchParams(window.location.search);
const gameId = params.get("game");
const seat = params.get("seat");
if (gameId !== null && seat !== null) {
  playSeat(gameId, Number(seat));
} else {
  dashboard();
}
