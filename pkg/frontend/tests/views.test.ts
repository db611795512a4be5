import { describe, expect, it } from "vitest";

import type { AssetDto, Page, SessionDto, ToolSummary } from "../src/api.js";
import {
  diffLines,
  projectAsset,
  projectCatalogue,
  projectGate,
  projectSession,
} from "../src/views.js";

const SESSION: SessionDto = {
  session_id: "s1",
  status: "waiting_gate",
  cursor: 1,
  created_at: "2026-01-01T00:00:00+00:00",
  layout: {
    layout_id: "smoke",
    title: "Smoke",
    taxonomy_ref: "t1",
    steps: [
      {
        agent_id: "draft",
        step_id: "1.1",
        title: "Draft",
        kind: "automated",
        enabled_tools: [],
        inputs: [{ name: "seed.md", producer: "seed" }],
        outputs: [{ name: "draft.md", media_type: "text/markdown" }],
      },
      {
        agent_id: "review",
        step_id: "2.5",
        title: "Review",
        kind: "manual_gate",
        enabled_tools: [],
        inputs: [{ name: "draft.md", producer: null }],
        outputs: [],
      },
    ],
  },
  transcripts: {
    draft: [
      { role: "system", content: "p", timestamp: "t" },
      { role: "assistant", content: "done", timestamp: "t" },
    ],
  },
  assets: {
    "draft.md": {
      asset_id: "draft.md",
      name: "draft.md",
      media_type: "text/markdown",
      latest_version: 2,
      versions: [
        {
          version: 1,
          producer: "draft",
          parent_version: null,
          created_at: "t",
          superseded: false,
          content: "one\ntwo\n",
        },
        {
          version: 2,
          producer: "human",
          parent_version: 1,
          created_at: "t",
          superseded: false,
          content: "one\nTWO\nthree\n",
        },
      ],
    },
  },
};

describe("projectSession", () => {
  it("marks panes done/current/pending from the cursor", () => {
    const view = projectSession(SESSION);
    expect(view.panes.map((p) => p.state)).toEqual(["done", "current"]);
    expect(view.panes[0].turns).toHaveLength(2);
    expect(view.assetNames).toEqual(["draft.md"]);
  });
});

describe("projectGate", () => {
  it("is present exactly when the cursor sits on a decidable gate", () => {
    expect(projectGate(SESSION)?.agentId).toBe("review");
    const running = { ...SESSION, cursor: 0, status: "running" as const };
    expect(projectGate(running)).toBeNull();
    const completed = { ...SESSION, cursor: 2, status: "completed" as const };
    expect(projectGate(completed)).toBeNull();
  });
});

describe("projectAsset", () => {
  it("keeps the version chain and flattens producers", () => {
    const view = projectAsset(SESSION.assets["draft.md"]);
    expect(view.latestVersion).toBe(2);
    expect(view.versions.map((v) => v.producer)).toEqual(["draft", "human"]);
  });

  it("summarizes binary versions instead of inlining them", () => {
    const dto: AssetDto = {
      asset_id: "blob",
      name: "blob",
      media_type: "application/octet-stream",
      latest_version: 1,
      versions: [
        {
          version: 1,
          producer: "human",
          parent_version: null,
          created_at: "t",
          superseded: false,
          content_b64: "AAAA",
        },
      ],
    };
    expect(projectAsset(dto).versions[0].text).toContain("binary");
  });
});

describe("projectCatalogue", () => {
  it("projects cards with optional scores", () => {
    const page: Page<ToolSummary> = {
      items: [
        {
          tool_id: "a",
          name: "A",
          version: "1.0.0",
          description: "d",
          homepage: "",
          license: "",
          origin: "direct",
          stale: false,
          content_hash: "x",
          functions: ["f"],
          coverage_claims: 1,
          score: 0.5,
        },
      ],
      total: 1,
      offset: 0,
      limit: 50,
    };
    const view = projectCatalogue(page, "2.3", null);
    expect(view.cards[0].score).toBe(0.5);
    expect(view.stepFilter).toBe("2.3");
  });
});

describe("diffLines", () => {
  it("classifies added, removed, and unchanged lines", () => {
    const diff = diffLines("one\ntwo\n", "one\nTWO\nthree\n");
    expect(diff).toEqual([
      { kind: "same", text: "one" },
      { kind: "removed", text: "two" },
      { kind: "added", text: "TWO" },
      { kind: "added", text: "three" },
      { kind: "same", text: "" },
    ]);
  });

  it("treats identical inputs as all-same", () => {
    expect(diffLines("a\nb", "a\nb").every((l) => l.kind === "same")).toBe(true);
  });
});
