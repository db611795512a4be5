/**
 * Pure projections of API responses into what the panes render.
 *
 * Nothing in here talks to the network or owns state; given the same
 * API payloads these functions always produce the same view models.
 */

import type {
  AssetDto,
  AssetVersionDto,
  Page,
  SessionDto,
  ToolSummary,
  TurnDto,
} from "./api.js";

export type PaneState = "done" | "current" | "pending";

export interface StepPane {
  agentId: string;
  stepId: string;
  title: string;
  kind: "automated" | "manual_gate";
  state: PaneState;
  turns: TurnDto[];
  outputNames: string[];
}

export interface SessionView {
  sessionId: string;
  status: SessionDto["status"];
  cursor: number;
  layoutTitle: string;
  panes: StepPane[];
  assetNames: string[];
}

export function projectSession(dto: SessionDto): SessionView {
  const panes = dto.layout.steps.map((agent, index): StepPane => {
    let state: PaneState = "pending";
    if (index < dto.cursor) state = "done";
    else if (index === dto.cursor) state = "current";
    return {
      agentId: agent.agent_id,
      stepId: agent.step_id,
      title: agent.title,
      kind: agent.kind,
      state,
      turns: dto.transcripts[agent.agent_id] ?? [],
      outputNames: agent.outputs.map((o) => o.name),
    };
  });
  return {
    sessionId: dto.session_id,
    status: dto.status,
    cursor: dto.cursor,
    layoutTitle: dto.layout.title,
    panes,
    assetNames: Object.keys(dto.assets).sort(),
  };
}

export interface GatePrompt {
  agentId: string;
  title: string;
  stepId: string;
  inputNames: string[];
}

/** Present only when the session is sitting at a decidable gate. */
export function projectGate(dto: SessionDto): GatePrompt | null {
  const agent = dto.layout.steps[dto.cursor];
  if (!agent || agent.kind !== "manual_gate") return null;
  if (dto.status !== "waiting_gate" && dto.status !== "running") return null;
  return {
    agentId: agent.agent_id,
    title: agent.title,
    stepId: agent.step_id,
    inputNames: agent.inputs.map((i) => i.name),
  };
}

export interface AssetVersionView {
  version: number;
  producer: string;
  createdAt: string;
  superseded: boolean;
  text: string;
}

export interface AssetView {
  name: string;
  mediaType: string;
  latestVersion: number;
  versions: AssetVersionView[];
}

function versionText(version: AssetVersionDto): string {
  if (version.content !== undefined) return version.content;
  if (version.content_b64 !== undefined) return `(binary, base64 ${version.content_b64.length} chars)`;
  return "";
}

export function projectAsset(dto: AssetDto): AssetView {
  return {
    name: dto.name,
    mediaType: dto.media_type,
    latestVersion: dto.latest_version,
    versions: dto.versions.map((v) => ({
      version: v.version,
      producer: Array.isArray(v.producer) ? v.producer.join(".") : v.producer,
      createdAt: v.created_at,
      superseded: v.superseded,
      text: versionText(v),
    })),
  };
}

export interface ToolCard {
  toolId: string;
  name: string;
  version: string;
  description: string;
  score: number | null;
  stale: boolean;
  functions: string[];
}

export interface CatalogueView {
  stepFilter: string | null;
  query: string | null;
  total: number;
  cards: ToolCard[];
}

export function projectCatalogue(
  page: Page<ToolSummary>,
  stepFilter: string | null,
  query: string | null,
): CatalogueView {
  return {
    stepFilter,
    query,
    total: page.total,
    cards: page.items.map((tool) => ({
      toolId: tool.tool_id,
      name: tool.name,
      version: tool.version,
      description: tool.description,
      score: tool.score ?? null,
      stale: tool.stale,
      functions: tool.functions,
    })),
  };
}

export type DiffKind = "same" | "added" | "removed";

export interface DiffLine {
  kind: DiffKind;
  text: string;
}

/** Line-level LCS diff for the asset version comparison view. */
export function diffLines(before: string, after: string): DiffLine[] {
  const a = before.split("\n");
  const b = after.split("\n");
  const rows = a.length + 1;
  const cols = b.length + 1;
  const lcs = new Array<number>(rows * cols).fill(0);
  for (let i = a.length - 1; i >= 0; i--) {
    for (let j = b.length - 1; j >= 0; j--) {
      lcs[i * cols + j] =
        a[i] === b[j]
          ? lcs[(i + 1) * cols + j + 1] + 1
          : Math.max(lcs[(i + 1) * cols + j], lcs[i * cols + j + 1]);
    }
  }
  const out: DiffLine[] = [];
  let i = 0;
  let j = 0;
  while (i < a.length && j < b.length) {
    if (a[i] === b[j]) {
      out.push({ kind: "same", text: a[i] });
      i++;
      j++;
    } else if (lcs[(i + 1) * cols + j] >= lcs[i * cols + j + 1]) {
      out.push({ kind: "removed", text: a[i] });
      i++;
    } else {
      out.push({ kind: "added", text: b[j] });
      j++;
    }
  }
  for (; i < a.length; i++) out.push({ kind: "removed", text: a[i] });
  for (; j < b.length; j++) out.push({ kind: "added", text: b[j] });
  return out;
}
