/**
 * Typed client for the swarmhub HTTP API.
 *
 * Only documented endpoints are called here; every UI mutation goes
 * through this module and the UI reconciles from the response.
 */

import { baseUrl } from "./config.js";

export interface Violation {
  path: string;
  severity: "error" | "warning";
  message: string;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly violations: Violation[];

  constructor(status: number, code: string, detail: string, violations: Violation[]) {
    super(detail);
    this.status = status;
    this.code = code;
    this.violations = violations;
  }
}

export interface Page<T> {
  items: T[];
  total: number;
  offset: number;
  limit: number;
}

export interface ToolSummary {
  tool_id: string;
  name: string;
  version: string;
  description: string;
  homepage: string;
  license: string;
  origin: string;
  stale: boolean;
  content_hash: string;
  functions: string[];
  coverage_claims: number;
  score?: number;
}

export interface TaxonomyStep {
  id: string;
  title: string;
  description: string;
}

export interface TaxonomyDoc {
  schema_version: string;
  stages: {
    id: string;
    title: string;
    tasks: { id: number; title: string; steps: TaxonomyStep[] }[];
  }[];
  requirements: { id: string; statement: string; step_ids: string[] }[];
}

export interface ToolCallInfo {
  tool_id: string;
  function_name: string;
  arguments: Record<string, unknown>;
}

export interface TurnDto {
  role: "system" | "user" | "assistant" | "tool_result";
  content: string;
  timestamp: string;
  tool_call?: ToolCallInfo;
}

export interface AssetVersionDto {
  version: number;
  producer: string | [string, string];
  parent_version: number | null;
  created_at: string;
  superseded: boolean;
  content?: string;
  content_b64?: string;
}

export interface AssetDto {
  asset_id: string;
  name: string;
  media_type: string;
  latest_version: number;
  versions: AssetVersionDto[];
}

export interface AgentDto {
  agent_id: string;
  step_id: string;
  title: string;
  kind: "automated" | "manual_gate";
  enabled_tools: [string, string][];
  inputs: { name: string; producer: string | null }[];
  outputs: { name: string; media_type: string }[];
}

export interface SessionDto {
  session_id: string;
  status: "created" | "running" | "waiting_gate" | "completed" | "failed";
  cursor: number;
  created_at: string;
  layout: {
    layout_id: string;
    title: string;
    taxonomy_ref: string;
    steps: AgentDto[];
  };
  transcripts: Record<string, TurnDto[]>;
  assets: Record<string, AssetDto>;
}

export interface StepResultDto {
  agent_id: string;
  status: string;
  produced_assets: { name: string; version: number }[];
  tool_calls: number;
  transcript_delta: TurnDto[];
  session: SessionDto;
}

async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
  const response = await fetch(baseUrl() + path, {
    method,
    headers: body === undefined ? {} : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await response.text();
  let payload: unknown = null;
  try {
    payload = text ? JSON.parse(text) : null;
  } catch {
    payload = null;
  }
  if (!response.ok) {
    const err = (payload ?? {}) as {
      error?: string;
      detail?: string;
      violations?: Violation[];
    };
    throw new ApiError(
      response.status,
      err.error ?? "http_error",
      err.detail ?? `HTTP ${response.status}`,
      err.violations ?? [],
    );
  }
  return payload as T;
}

export function getHealth(): Promise<{ status: string; tools: number }> {
  return request("GET", "/api/v1/health");
}

export function getTaxonomy(): Promise<TaxonomyDoc> {
  return request("GET", "/api/v1/taxonomy");
}

export function queryTools(opts: {
  stepId?: string;
  q?: string;
  offset?: number;
  limit?: number;
}): Promise<Page<ToolSummary>> {
  const params = new URLSearchParams();
  if (opts.stepId) params.set("step_id", opts.stepId);
  if (opts.q) params.set("q", opts.q);
  if (opts.offset !== undefined) params.set("offset", String(opts.offset));
  if (opts.limit !== undefined) params.set("limit", String(opts.limit));
  const suffix = params.toString() ? `?${params.toString()}` : "";
  return request("GET", `/api/v1/tools${suffix}`);
}

export function getToolsForStep(stepId: string): Promise<Page<ToolSummary>> {
  return request("GET", `/api/v1/steps/${encodeURIComponent(stepId)}/tools`);
}

export function getSession(sessionId: string): Promise<SessionDto> {
  return request("GET", `/api/v1/sessions/${encodeURIComponent(sessionId)}`);
}

export function createSession(body: {
  layout_id: string;
  session_id?: string;
  seed_assets: { name: string; media_type?: string; content: string }[];
}): Promise<SessionDto> {
  return request("POST", "/api/v1/sessions", body);
}

export function runStep(sessionId: string, userMessage?: string): Promise<StepResultDto> {
  return request("POST", `/api/v1/sessions/${encodeURIComponent(sessionId)}/step`, {
    user_message: userMessage ?? null,
  });
}

export function decideGate(
  sessionId: string,
  approve: boolean,
  note = "",
): Promise<SessionDto> {
  return request("POST", `/api/v1/sessions/${encodeURIComponent(sessionId)}/gate`, {
    approve,
    note,
  });
}

export function saveAsset(
  sessionId: string,
  assetId: string,
  content: string,
  expectedVersion: number,
): Promise<AssetDto> {
  return request(
    "PUT",
    `/api/v1/sessions/${encodeURIComponent(sessionId)}/assets/${encodeURIComponent(assetId)}`,
    { content, expected_version: expectedVersion },
  );
}

export function rollbackTo(sessionId: string, agentId: string): Promise<SessionDto> {
  return request("POST", `/api/v1/sessions/${encodeURIComponent(sessionId)}/rollback`, {
    to_agent_id: agentId,
  });
}

export function exportUrl(sessionId: string): string {
  return `${baseUrl()}/api/v1/sessions/${encodeURIComponent(sessionId)}/export`;
}
