/** Typed client for the lab's HTTP API. The console consumes this interface
 * exclusively — no direct file or store access. */

import {
  EventPage,
  GameEvent,
  GameState,
  GameSummary,
  SubmitResult,
  TraceView,
  TurnSubmission,
  Verdict,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown,
  ) {
    super(`HTTP ${status}: ${JSON.stringify(detail)}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => null);
    if (!response.ok) throw new ApiError(response.status, body?.detail ?? body);
    return body as T;
  }

  listGames(): Promise<GameSummary[]> {
    return this.request("/games");
  }

  launchGame(config: Record<string, unknown>, agents: Record<string, unknown>[]): Promise<{ game_id: string }> {
    return this.request("/games", {
      method: "POST",
      body: JSON.stringify({ config, agents }),
    });
  }

  gameState(gameId: string, seat?: number): Promise<GameState> {
    const query = seat === undefined ? "" : `?seat=${seat}`;
    return this.request(`/games/${gameId}/state${query}`);
  }

  submitTurn(gameId: string, submission: TurnSubmission): Promise<SubmitResult> {
    return this.request(`/games/${gameId}/turns`, {
      method: "POST",
      body: JSON.stringify(submission),
    });
  }

  validate(gameId: string, seat: number, action: Record<string, unknown>): Promise<Verdict> {
    return this.request(`/games/${gameId}/validate`, {
      method: "POST",
      body: JSON.stringify({ seat, action }),
    });
  }

  trace(gameId: string, view: string = "spectator"): Promise<TraceView> {
    return this.request(`/games/${gameId}/trace?view=${view}`);
  }

  events(gameId: string, since: number, view: string = "spectator"): Promise<EventPage> {
    return this.request(`/games/${gameId}/events?since=${since}&view=${view}`);
  }

  metrics(pivot: boolean = false): Promise<Record<string, unknown>> {
    return this.request(`/metrics?pivot=${pivot}`);
  }

  scenarios(): Promise<Record<string, { ratio: string }>> {
    return this.request("/scenarios");
  }

  createExperiment(grid: Record<string, unknown>, repetitions: number): Promise<{ experiment_run_id: string }> {
    return this.request("/experiments", {
      method: "POST",
      body: JSON.stringify({ grid, repetitions }),
    });
  }

  launchExperiment(experimentId: string, agents: Record<string, unknown>[]): Promise<{ game_ids: string[] }> {
    return this.request(`/experiments/${experimentId}/launch`, {
      method: "POST",
      body: JSON.stringify({ agents }),
    });
  }
}

export interface EventSubscription {
  stop(): void;
}

/** Live updates: server-push stream when EventSource is available, with a
 * transparent polling fallback (also used after a stream error). */
export function subscribeEvents(
  client: ApiClient,
  baseUrl: string,
  gameId: string,
  view: string,
  onEvent: (event: GameEvent) => void,
  onEnd: (status: string) => void,
  pollIntervalMs: number = 500,
): EventSubscription {
  let stopped = false;
  let cursor = 0;

  const poll = async (): Promise<void> => {
    while (!stopped) {
      const page = await client.events(gameId, cursor, view);
      for (const event of page.events) onEvent(event);
      cursor = page.next;
      if (page.status !== "running") {
        onEnd(page.status);
        return;
      }
      await new Promise((resolve) => setTimeout(resolve, pollIntervalMs));
    }
  };

  if (typeof EventSource === "undefined") {
    void poll();
    return { stop: () => (stopped = true) };
  }

  const source = new EventSource(
    `${baseUrl}/games/${gameId}/events/stream?since=0&view=${view}`,
  );
  source.onmessage = (message) => {
    const payload = JSON.parse(message.data) as GameEvent & { status?: string };
    if (payload.kind === "stream_end") {
      source.close();
      onEnd(payload.status ?? "done");
      return;
    }
    cursor = payload.seq + 1;
    onEvent(payload);
  };
  source.onerror = () => {
    source.close();
    if (!stopped) void poll();
  };
  return {
    stop: () => {
      stopped = true;
      source.close();
    },
  };
}
