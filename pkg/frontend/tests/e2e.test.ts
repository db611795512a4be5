/**
 * End-to-end smoke against a live service: browse the catalogue filtered
 * by step 2.3, run one workflow step, edit the produced asset, approve the
 * gate. After every action the rendered DOM is compared with fresh API
 * state. The service is the real Python process with a scripted backend.
 */

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, expect, it } from "vitest";

import * as api from "../src/api.js";
import { setBaseUrl } from "../src/config.js";
import { App } from "../src/ui.js";

const PYTHON = process.env.PYTHON ?? "python3";
const SESSION_ID = "ui-smoke-1";

let tempDir: string;
let server: ChildProcess | null = null;
let app: App;
let root: HTMLElement;

async function waitFor(
  predicate: () => boolean,
  what: string,
  timeoutMs = 15_000,
): Promise<void> {
  const started = Date.now();
  while (Date.now() - started < timeoutMs) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  throw new Error(`timed out waiting for ${what}`);
}

beforeAll(async () => {
  tempDir = mkdtempSync(join(tmpdir(), "swarmhub-ui-"));
  const prep = spawnSync(PYTHON, [join(__dirname, "prepare_env.py"), tempDir], {
    encoding: "utf-8",
  });
  if (!prep.stdout.includes("ready")) {
    throw new Error(`prepare_env failed: ${prep.stderr}`);
  }

  const port = 21000 + Math.floor(Math.random() * 10_000);
  setBaseUrl(`http://127.0.0.1:${port}`);
  server = spawn(PYTHON, [
    "-m", "swarmhub.cli", "serve",
    "--host", "127.0.0.1",
    "--port", String(port),
    "--data-dir", join(tempDir, "data"),
    "--backend", "scripted",
    "--fixture", join(tempDir, "scripted.json"),
  ]);

  let healthy = false;
  for (let attempt = 0; attempt < 150 && !healthy; attempt++) {
    try {
      const health = await api.getHealth();
      healthy = health.status === "ok";
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
  }
  if (!healthy) throw new Error("service did not become healthy");

  await api.createSession({
    layout_id: "smoke",
    session_id: SESSION_ID,
    seed_assets: [
      { name: "research_interest.md", content: "# Interest\nUAV wings.\n" },
    ],
  });

  root = document.createElement("div");
  document.body.appendChild(root);
  app = new App(root);
});

afterAll(() => {
  server?.kill("SIGTERM");
  rmSync(tempDir, { recursive: true, force: true });
});

function click(selector: string): void {
  const el = root.querySelector<HTMLElement>(selector);
  if (!el) throw new Error(`no element matches ${selector}`);
  el.click();
}

function text(selector: string): string {
  return root.querySelector(selector)?.textContent?.trim() ?? "";
}

it("browses the catalogue filtered by step 2.3 in API order", async () => {
  await app.openCatalogue();
  const select = root.querySelector<HTMLSelectElement>("[data-role=step-filter]");
  expect(select, "step filter rendered").toBeTruthy();
  select!.value = "2.3";
  click("[data-action=apply-filter]");
  // scores render only when a step filter is active
  await waitFor(
    () => root.querySelector("[data-role=score]") !== null,
    "filtered tool cards with scores",
  );

  const rendered = Array.from(root.querySelectorAll(".tool-card")).map((card) => ({
    tool_id: card.getAttribute("data-tool"),
    score: card.querySelector("[data-role=score]")?.textContent,
  }));
  const fromApi = await api.getToolsForStep("2.3");
  expect(rendered).toEqual(
    fromApi.items.map((tool) => ({
      tool_id: tool.tool_id,
      score: (tool.score ?? 0).toFixed(3),
    })),
  );
  expect(rendered.map((r) => r.tool_id)).toEqual([
    "org.example.termcheck",
    "org.example.scholar",
  ]);
  expect(text("[data-role=result-count]")).toBe(`${fromApi.total} tools`);
});

it("runs one step and renders exactly the persisted session state", async () => {
  await app.openSession(SESSION_ID);
  expect(root.querySelector("[data-role=session]")?.getAttribute("data-status"))
    .toBe("created");

  click("[data-action=run-step]");
  await waitFor(
    () =>
      root.querySelector("[data-role=session]")?.getAttribute("data-status") ===
      "waiting_gate",
    "step to finish and the gate to arm",
  );

  const fromApi = await api.getSession(SESSION_ID);
  expect(fromApi.status).toBe("waiting_gate");

  const draftPane = root.querySelector('[data-agent="draft"]');
  const renderedTurns = Array.from(draftPane!.querySelectorAll(".turn pre")).map(
    (el) => el.textContent,
  );
  expect(renderedTurns).toEqual(fromApi.transcripts["draft"].map((t) => t.content));
  expect(draftPane!.querySelector("[data-role=pane-state]")?.textContent).toBe("done");

  // open the produced asset's tab; its rendered content comes from the API
  click('[data-action=select-asset][data-asset="draft.md"]');
  await waitFor(
    () =>
      root.querySelector("[data-role=asset-view]")?.getAttribute("data-name") ===
      "draft.md",
    "draft.md asset pane",
  );
  const apiDraft = fromApi.assets["draft.md"];
  expect(text("[data-role=asset-content]")).toBe(apiDraft.versions[0].content!.trim());
  expect(
    root.querySelector("[data-role=asset-view]")?.getAttribute("data-latest"),
  ).toBe("1");
});

it("saves an asset edit as a new version with the editor draft", async () => {
  const editor = root.querySelector<HTMLTextAreaElement>("[data-role=asset-editor]");
  expect(editor).toBeTruthy();
  editor!.value = "# Draft scope\n\nHuman-tightened wording.\n";
  editor!.dispatchEvent(new Event("input", { bubbles: true }));
  click("[data-action=save-asset]");
  await waitFor(
    () =>
      root.querySelector("[data-role=asset-view]")?.getAttribute("data-latest") ===
      "2",
    "edited asset version to render",
  );

  const fromApi = await api.getSession(SESSION_ID);
  const asset = fromApi.assets["draft.md"];
  expect(asset.latest_version).toBe(2);
  expect(asset.versions[1].producer).toBe("human");
  expect(text("[data-role=asset-content]")).toBe(asset.versions[1].content!.trim());

  // optimistic concurrency: a second save against the stale version 409s
  let stale: api.ApiError | null = null;
  try {
    await api.saveAsset(SESSION_ID, "draft.md", "conflict", 1);
  } catch (err) {
    stale = err as api.ApiError;
  }
  expect(stale?.status).toBe(409);
});

it("approves the gate and renders the completed session", async () => {
  expect(root.querySelector("[data-role=gate-prompt]")).toBeTruthy();
  click("[data-action=gate-approve]");
  await waitFor(
    () =>
      root.querySelector("[data-role=session]")?.getAttribute("data-status") ===
      "completed",
    "gate approval to complete the session",
  );

  const fromApi = await api.getSession(SESSION_ID);
  expect(fromApi.status).toBe("completed");
  expect(text("[data-role=session-status]")).toBe(fromApi.status);
  expect(fromApi.transcripts["review"].map((t) => t.content)).toEqual([
    "Gate approved.",
  ]);
  // reload from scratch reconstructs the identical view (stateless UI)
  const fresh = new App(document.createElement("div"));
  await fresh.openSession(SESSION_ID);
  expect(fresh.root.querySelector("[data-role=session]")?.getAttribute("data-status"))
    .toBe("completed");
});
