// Outline step editor: the heading-grammar text is edited directly and
// validated by the service on apply; grammar errors come back inline and
// the draft text is never discarded.

import { ApiError, isStale } from "./api.js";
import { clear, el } from "./dom.js";
import { MutationGate } from "./gate.js";
import type { OutlineView } from "./types.js";

export interface OutlineCallbacks {
  apply(text: string, version: number): Promise<OutlineView | { version: number; text: string }>;
  reload(): Promise<void>;
  notify(message: string): void;
}

export class OutlineEditor {
  private readonly host: HTMLElement;
  private readonly cb: OutlineCallbacks;
  private readonly gate = new MutationGate();

  private view: OutlineView | null = null;
  private editable = false;
  /** Unsaved text; null means the textarea mirrors the server copy. */
  private draft: string | null = null;
  private textarea: HTMLTextAreaElement | null = null;
  private errorBox: HTMLElement | null = null;

  constructor(host: HTMLElement, cb: OutlineCallbacks) {
    this.host = host;
    this.cb = cb;
    this.host.classList.add("outline-editor");
  }

  get model(): OutlineView | null {
    return this.view;
  }

  get dirty(): boolean {
    return this.draft !== null && this.draft !== this.view?.text;
  }

  setModel(view: OutlineView | null, editable: boolean): void {
    const unchanged =
      view !== null &&
      this.view !== null &&
      view.version === this.view.version &&
      view.text === this.view.text;
    this.view = view;
    this.editable = editable;
    if (!unchanged) {
      this.draft = null;
    }
    this.render("");
  }

  private render(error: string): void {
    clear(this.host);
    const view = this.view;
    if (!view) {
      this.host.append(el("p", { className: "muted", text: "No outline yet." }));
      return;
    }
    this.textarea = el("textarea", {
      id: "outline-text",
      rows: 16,
      value: this.draft ?? view.text,
      disabled: !this.editable,
      onInput: (ev) => {
        this.draft = (ev.target as HTMLTextAreaElement).value;
        this.updateStatus();
      },
    });
    this.errorBox = el("div", { className: "editor-error", text: error });
    const status = el("span", {
      className: "editor-status",
      text: this.statusText(),
    });
    const apply = el("button", {
      id: "btn-apply-outline",
      text: "Apply outline",
      disabled: !this.editable,
      onClick: () => void this.apply(),
    });
    this.host.append(
      el("p", {
        className: "hint",
        text:
          "One heading per line: # level 1, ## level 2, ### level 3. " +
          "Predefined sections (" + view.predefined.join(", ") + ") must stay.",
      }),
      this.textarea,
      el("div", { className: "editor-actions" }, [apply, status]),
      this.errorBox,
    );
  }

  private statusText(): string {
    if (!this.view) {
      return "";
    }
    const base = `version ${this.view.version}`;
    return this.dirty ? `${base}, unsaved changes` : base;
  }

  private updateStatus(): void {
    const status = this.host.querySelector(".editor-status");
    if (status) {
      status.textContent = this.statusText();
    }
  }

  async apply(): Promise<void> {
    await this.gate.run(async () => {
      const view = this.view;
      const textarea = this.textarea;
      if (!view || !textarea) {
        return;
      }
      const text = textarea.value;
      try {
        const updated = await this.cb.apply(text, view.version);
        this.view = { ...view, version: updated.version, text: updated.text };
        this.draft = null;
        this.render("");
      } catch (err) {
        if (isStale(err)) {
          this.cb.notify("Outline changed elsewhere; reloading the latest version.");
          await this.cb.reload();
        } else if (err instanceof ApiError) {
          // invalid grammar: keep the draft, surface the parser's message
          this.draft = text;
          this.render(err.detail);
        } else {
          this.draft = text;
          this.render(String(err));
        }
      }
    });
  }
}
