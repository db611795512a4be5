/**
 * DOM rendering and event wiring.
 *
 * Every mutation is an API call and the UI re-renders from the response,
 * so a reload reconstructs the identical view from the server. The only
 * client-side state beyond API snapshots is unsaved editor drafts and
 * view selections.
 */

import * as api from "./api.js";
import {
  AssetView,
  CatalogueView,
  SessionView,
  diffLines,
  projectAsset,
  projectCatalogue,
  projectGate,
  projectSession,
} from "./views.js";

const POLL_INTERVAL_MS = 1000;

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

interface UiState {
  route: { view: "catalogue" } | { view: "session"; id: string };
  session: api.SessionDto | null;
  catalogue: api.Page<api.ToolSummary> | null;
  taxonomySteps: { id: string; title: string }[];
  stepFilter: string;
  query: string;
  selectedAsset: string | null;
  compareWith: number | null;
  drafts: Map<string, string>;
  busy: boolean;
  error: string | null;
}

export class App {
  readonly root: HTMLElement;
  readonly state: UiState;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(root: HTMLElement) {
    this.root = root;
    this.state = {
      route: { view: "catalogue" },
      session: null,
      catalogue: null,
      taxonomySteps: [],
      stepFilter: "",
      query: "",
      selectedAsset: null,
      compareWith: null,
      drafts: new Map(),
      busy: false,
      error: null,
    };
  }

  // -- navigation -------------------------------------------------------

  async openCatalogue(): Promise<void> {
    this.state.route = { view: "catalogue" };
    if (this.state.taxonomySteps.length === 0) {
      const taxonomy = await api.getTaxonomy();
      this.state.taxonomySteps = taxonomy.stages.flatMap((stage) =>
        stage.tasks.flatMap((task) =>
          task.steps.map((step) => ({ id: step.id, title: step.title })),
        ),
      );
    }
    await this.refreshCatalogue();
  }

  async refreshCatalogue(): Promise<void> {
    this.state.catalogue = await api.queryTools({
      stepId: this.state.stepFilter || undefined,
      q: this.state.query || undefined,
    });
    this.render();
  }

  async openSession(sessionId: string): Promise<void> {
    this.state.route = { view: "session", id: sessionId };
    await this.refreshSession();
  }

  async refreshSession(): Promise<void> {
    if (this.state.route.view !== "session") return;
    this.state.session = await api.getSession(this.state.route.id);
    if (this.state.selectedAsset === null) {
      const names = Object.keys(this.state.session.assets).sort();
      this.state.selectedAsset = names[names.length - 1] ?? null;
    }
    this.render();
  }

  // -- session actions -----------------------------------------------------

  /** Run the current automated agent; poll persisted turns while in flight. */
  async sendStep(message?: string): Promise<void> {
    if (this.state.route.view !== "session") return;
    const sessionId = this.state.route.id;
    this.state.busy = true;
    this.state.error = null;
    this.render();
    this.pollTimer = setInterval(() => {
      this.refreshSession().catch(() => undefined);
    }, POLL_INTERVAL_MS);
    try {
      const result = await api.runStep(sessionId, message);
      this.state.session = result.session;
    } catch (err) {
      this.state.error = String(err instanceof Error ? err.message : err);
      await this.refreshSession().catch(() => undefined);
    } finally {
      if (this.pollTimer !== null) clearInterval(this.pollTimer);
      this.pollTimer = null;
      this.state.busy = false;
      this.render();
    }
  }

  async decideGate(approve: boolean, note: string): Promise<void> {
    if (this.state.route.view !== "session") return;
    this.state.error = null;
    try {
      this.state.session = await api.decideGate(this.state.route.id, approve, note);
    } catch (err) {
      this.state.error = String(err instanceof Error ? err.message : err);
    }
    this.render();
  }

  async saveAsset(assetName: string): Promise<void> {
    if (this.state.route.view !== "session" || !this.state.session) return;
    const draft = this.state.drafts.get(assetName);
    const asset = this.state.session.assets[assetName];
    if (draft === undefined || !asset) return;
    this.state.error = null;
    try {
      await api.saveAsset(this.state.route.id, asset.asset_id, draft,
                          asset.latest_version);
      this.state.drafts.delete(assetName);
      await this.refreshSession();
    } catch (err) {
      this.state.error = String(err instanceof Error ? err.message : err);
      this.render();
    }
  }

  // -- rendering --------------------------------------------------------------

  render(): void {
    const body =
      this.state.route.view === "catalogue"
        ? this.renderCatalogue()
        : this.renderSession();
    const errorBox = this.state.error
      ? `<div class="error" data-role="error">${esc(this.state.error)}
           <button data-action="dismiss-error">dismiss</button></div>`
      : "";
    this.root.innerHTML = `
      <header>
        <strong>swarmhub</strong>
        <nav><a href="#/catalogue" data-action="nav-catalogue">catalogue</a></nav>
      </header>
      ${errorBox}
      <main>${body}</main>`;
    this.bind();
  }

  private renderCatalogue(): string {
    const view: CatalogueView | null = this.state.catalogue
      ? projectCatalogue(this.state.catalogue, this.state.stepFilter || null,
                         this.state.query || null)
      : null;
    const options = ['<option value="">all steps</option>']
      .concat(
        this.state.taxonomySteps.map(
          (step) =>
            `<option value="${esc(step.id)}" ${
              step.id === this.state.stepFilter ? "selected" : ""
            }>${esc(step.id)} ${esc(step.title)}</option>`,
        ),
      )
      .join("");
    const cards = view
      ? view.cards
          .map(
            (card) => `
        <article class="tool-card" data-tool="${esc(card.toolId)}">
          <h3>${esc(card.name)} <small>${esc(card.version)}</small></h3>
          ${card.score !== null
            ? `<span class="score" data-role="score">${card.score.toFixed(3)}</span>`
            : ""}
          ${card.stale ? '<span class="stale">stale</span>' : ""}
          <p>${esc(card.description)}</p>
          <footer>${card.functions.map((f) => `<code>${esc(f)}</code>`).join(" ")}</footer>
        </article>`,
          )
          .join("")
      : "<p>loading…</p>";
    return `
      <section class="catalogue" data-role="catalogue">
        <form data-role="catalogue-controls">
          <select data-role="step-filter">${options}</select>
          <input data-role="text-query" type="search" placeholder="search tools"
                 value="${esc(this.state.query)}">
          <button data-action="apply-filter">filter</button>
        </form>
        <p data-role="result-count">${view ? `${view.total} tools` : ""}</p>
        <div class="cards" data-role="cards">${cards}</div>
      </section>`;
  }

  private renderSession(): string {
    const dto = this.state.session;
    if (!dto) return "<p>loading…</p>";
    const view: SessionView = projectSession(dto);
    const gate = projectGate(dto);
    const panes = view.panes
      .map((pane) => {
        const turns = pane.turns
          .map(
            (turn) => `
          <div class="turn turn-${turn.role}">
            <span class="role">${turn.role}</span>
            ${turn.tool_call
              ? `<code class="tool-call">${esc(turn.tool_call.tool_id)}.${esc(
                  turn.tool_call.function_name)}(${esc(
                  JSON.stringify(turn.tool_call.arguments))})</code>`
              : ""}
            <pre>${esc(turn.content)}</pre>
          </div>`,
          )
          .join("");
        const controls = this.paneControls(pane.agentId, pane.state, pane.kind, gate);
        return `
        <section class="pane pane-${pane.state}" data-agent="${esc(pane.agentId)}">
          <h3>${esc(pane.stepId)} ${esc(pane.title)}
            <span class="pane-state" data-role="pane-state">${pane.state}</span>
          </h3>
          <div class="turns">${turns}</div>
          ${controls}
        </section>`;
      })
      .join("");
    return `
      <section class="session" data-role="session"
               data-status="${esc(view.status)}" data-cursor="${view.cursor}">
        <h2>${esc(view.layoutTitle)}
          <span data-role="session-status">${esc(view.status)}</span></h2>
        <div class="panes">${panes}</div>
        ${this.renderAssets(dto)}
        <p><a data-role="export-link" href="${api.exportUrl(view.sessionId)}">export session</a></p>
      </section>`;
  }

  private paneControls(
    agentId: string,
    state: string,
    kind: string,
    gate: ReturnType<typeof projectGate>,
  ): string {
    if (state !== "current" || this.state.session?.status === "completed") return "";
    if (kind === "manual_gate" && gate && gate.agentId === agentId) {
      return `
        <div class="gate" data-role="gate-prompt">
          <p>Gate over ${gate.inputNames.map(esc).join(", ")}</p>
          <textarea data-role="gate-note" placeholder="rejection note"></textarea>
          <button data-action="gate-approve">approve</button>
          <button data-action="gate-reject">reject</button>
        </div>`;
    }
    if (kind === "automated") {
      return `
        <div class="send" data-role="step-controls">
          <textarea data-role="user-message" placeholder="optional note to the agent"></textarea>
          <button data-action="run-step" ${this.state.busy ? "disabled" : ""}>
            ${this.state.busy ? "running…" : "run step"}</button>
        </div>`;
    }
    return "";
  }

  private renderAssets(dto: api.SessionDto): string {
    const names = Object.keys(dto.assets).sort();
    if (names.length === 0) return "";
    const selected = this.state.selectedAsset && dto.assets[this.state.selectedAsset]
      ? this.state.selectedAsset
      : names[0];
    const asset: AssetView = projectAsset(dto.assets[selected]);
    const tabs = names
      .map(
        (name) =>
          `<button data-action="select-asset" data-asset="${esc(name)}"
             class="${name === selected ? "active" : ""}">${esc(name)}</button>`,
      )
      .join("");
    const latest = asset.versions[asset.versions.length - 1];
    const draft = this.state.drafts.get(selected) ?? latest.text;
    const versionOptions = asset.versions
      .map(
        (v) =>
          `<option value="${v.version}" ${
            v.version === this.state.compareWith ? "selected" : ""
          }>v${v.version} by ${esc(v.producer)}${v.superseded ? " (superseded)" : ""}</option>`,
      )
      .join("");
    const compare = this.state.compareWith;
    let diffHtml = "";
    if (compare !== null && compare !== latest.version) {
      const older = asset.versions.find((v) => v.version === compare);
      if (older) {
        diffHtml = diffLines(older.text, latest.text)
          .map((line) => `<div class="diff-${line.kind}">${esc(line.text)}</div>`)
          .join("");
        diffHtml = `<div class="diff" data-role="diff">${diffHtml}</div>`;
      }
    }
    return `
      <section class="assets" data-role="assets">
        <h3>assets</h3>
        <div class="asset-tabs">${tabs}</div>
        <div class="asset" data-role="asset-view" data-name="${esc(asset.name)}"
             data-latest="${asset.latestVersion}">
          <p>${esc(asset.name)} (${esc(asset.mediaType)}), v${asset.latestVersion}
             by ${esc(latest.producer)}</p>
          <label>compare with
            <select data-role="version-picker">
              ${versionOptions}
            </select>
          </label>
          <pre data-role="asset-content">${esc(latest.text)}</pre>
          ${diffHtml}
          <textarea data-role="asset-editor">${esc(draft)}</textarea>
          <button data-action="save-asset" data-asset="${esc(selected)}">save new version</button>
        </div>
      </section>`;
  }

  // -- event wiring ------------------------------------------------------------

  private bind(): void {
    this.on("[data-action=nav-catalogue]", "click", (event) => {
      event.preventDefault();
      void this.openCatalogue();
    });
    this.on("[data-action=dismiss-error]", "click", () => {
      this.state.error = null;
      this.render();
    });
    this.on("[data-action=apply-filter]", "click", (event) => {
      event.preventDefault();
      const select = this.root.querySelector<HTMLSelectElement>("[data-role=step-filter]");
      const input = this.root.querySelector<HTMLInputElement>("[data-role=text-query]");
      this.state.stepFilter = select?.value ?? "";
      this.state.query = input?.value ?? "";
      void this.refreshCatalogue();
    });
    this.on("[data-action=run-step]", "click", () => {
      const box = this.root.querySelector<HTMLTextAreaElement>("[data-role=user-message]");
      const message = box?.value.trim();
      void this.sendStep(message ? message : undefined);
    });
    this.on("[data-action=gate-approve]", "click", () => {
      void this.decideGate(true, "");
    });
    this.on("[data-action=gate-reject]", "click", () => {
      const note = this.root.querySelector<HTMLTextAreaElement>("[data-role=gate-note]");
      void this.decideGate(false, note?.value ?? "");
    });
    this.on("[data-action=select-asset]", "click", (event) => {
      const target = event.currentTarget as HTMLElement;
      this.state.selectedAsset = target.dataset.asset ?? null;
      this.state.compareWith = null;
      this.render();
    });
    this.on("[data-action=save-asset]", "click", (event) => {
      const target = event.currentTarget as HTMLElement;
      const name = target.dataset.asset;
      const editor = this.root.querySelector<HTMLTextAreaElement>("[data-role=asset-editor]");
      if (name && editor) {
        this.state.drafts.set(name, editor.value);
        void this.saveAsset(name);
      }
    });
    const picker = this.root.querySelector<HTMLSelectElement>("[data-role=version-picker]");
    picker?.addEventListener("change", () => {
      this.state.compareWith = Number(picker.value);
      this.render();
    });
    const editor = this.root.querySelector<HTMLTextAreaElement>("[data-role=asset-editor]");
    editor?.addEventListener("input", () => {
      if (this.state.selectedAsset) {
        this.state.drafts.set(this.state.selectedAsset, editor.value);
      }
    });
  }

  private on(
    selector: string,
    event: string,
    handler: (event: Event) => void,
  ): void {
    this.root.querySelectorAll(selector).forEach((el) => {
      el.addEventListener(event, handler);
    });
  }
}
