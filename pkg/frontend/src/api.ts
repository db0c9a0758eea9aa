import type {
  PresetsResponse,
  SessionState,
  StepResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const detail =
      typeof body === "object" && body !== null && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : resp.statusText;
    throw new ApiError(resp.status, detail);
  }
  return body as T;
}

function post<T>(url: string, payload: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export interface CreateSessionBody {
  method: string;
  preset?: string;
  seed?: number;
  options?: Record<string, unknown>;
}

export interface StepBody {
  action: string;
  index?: number;
  team_a?: string;
  team_b?: string;
}

export const api = {
  presets: () => request<PresetsResponse>("/api/presets"),
  createSession: (body: CreateSessionBody) =>
    post<SessionState>("/api/sessions", body),
  getSession: (id: string) => request<SessionState>(`/api/sessions/${id}`),
  step: (id: string, body: StepBody) =>
    post<StepResponse>(`/api/sessions/${id}/step`, body),
  verify: (id: string) =>
    post<{ match: boolean }>(`/api/sessions/${id}/verify`, {}),
};
