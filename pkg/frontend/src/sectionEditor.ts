// Section step editor: plain-text editing of one section at a time with a
// rendered Markdown preview, plus checkboxes enabling or disabling figure
// and table placements.

import { isStale } from "./api.js";
import { clear, el } from "./dom.js";
import { MutationGate } from "./gate.js";
import { renderMarkdown } from "./markdown.js";
import type { AssetRow, SectionEditResult, SectionView } from "./types.js";

export interface SectionCallbacks {
  save(index: number, version: number, body: string): Promise<SectionEditResult>;
  toggleAsset(refId: string, assetIndex: number, enabled: boolean): Promise<void>;
  reload(): Promise<void>;
  notify(message: string): void;
}

export class SectionEditor {
  private readonly host: HTMLElement;
  private readonly cb: SectionCallbacks;
  private readonly saveGate = new MutationGate();
  private readonly assetGate = new MutationGate();

  private sections: SectionView[] = [];
  private assets: AssetRow[] = [];
  private editable = false;
  private assetsEditable = false;
  private selected = 0;
  /** Unsaved body text per section index. */
  private drafts = new Map<number, string>();
  private preview: HTMLElement | null = null;

  constructor(host: HTMLElement, cb: SectionCallbacks) {
    this.host = host;
    this.cb = cb;
    this.host.classList.add("section-editor");
  }

  setModel(
    sections: SectionView[] | null,
    assets: AssetRow[],
    editable: boolean,
    assetsEditable = editable,
  ): void {
    this.sections = sections ?? [];
    this.assets = assets;
    this.editable = editable;
    this.assetsEditable = assetsEditable;
    if (!this.sections.some((s) => s.index === this.selected)) {
      this.selected = this.sections[0]?.index ?? 0;
    }
    this.render("");
  }

  get selectedIndex(): number {
    return this.selected;
  }

  select(index: number): void {
    if (this.sections.some((s) => s.index === index)) {
      this.selected = index;
      this.render("");
    }
  }

  private current(): SectionView | undefined {
    return this.sections.find((s) => s.index === this.selected);
  }

  private render(error: string): void {
    clear(this.host);
    if (this.sections.length === 0) {
      this.host.append(el("p", { className: "muted", text: "No sections yet." }));
      return;
    }
    const list = el(
      "ul",
      { className: "section-list" },
      this.sections.map((section) =>
        el(
          "li",
          {
            className: section.index === this.selected ? "selected" : "",
            dataset: { index: String(section.index), status: section.status },
            onClick: () => this.select(section.index),
          },
          [
            el("span", { className: "section-title", text: section.title }),
            el("span", {
              className: `badge badge-${section.status}`,
              text: `${section.status} v${section.version}`,
            }),
          ],
        ),
      ),
    );

    const section = this.current();
    const body = this.drafts.get(this.selected) ?? section?.body ?? "";
    const textarea = el("textarea", {
      id: "section-body",
      rows: 14,
      value: body,
      disabled: !this.editable,
      onInput: (ev) => {
        const value = (ev.target as HTMLTextAreaElement).value;
        this.drafts.set(this.selected, value);
        this.updatePreview(value);
      },
    });
    const save = el("button", {
      id: "btn-save-section",
      text: "Save section",
      disabled: !this.editable,
      onClick: () => void this.save(),
    });
    this.preview = el("div", { className: "section-preview" });
    this.updatePreview(body);

    const editor = el("div", { className: "section-pane" }, [
      el("h3", { text: section ? section.title : "" }),
      section && section.warnings.length > 0
        ? el("div", { className: "warnings", text: section.warnings.join("; ") })
        : el("span", {}),
      textarea,
      el("div", { className: "editor-actions" }, [save]),
      el("div", { className: "editor-error", text: error }),
      el("h4", { text: "Preview" }),
      this.preview,
    ]);

    this.host.append(
      el("div", { className: "section-columns" }, [list, editor]),
      this.renderAssets(),
    );
  }

  private updatePreview(body: string): void {
    if (this.preview) {
      this.preview.innerHTML = renderMarkdown(body);
    }
  }

  private renderAssets(): HTMLElement {
    const box = el("div", { className: "asset-box" });
    if (this.assets.length === 0) {
      return box;
    }
    box.append(el("h4", { text: "Figure and table placements" }));
    const items = this.assets.map((asset) => {
      const key = `${asset.ref_id}:${asset.asset_index}`;
      const checkbox = el("input", {
        type: "checkbox",
        id: `asset-${key}`,
        checked: !asset.disabled,
        disabled: !this.assetsEditable,
        onChange: (ev) =>
          void this.toggle(asset, (ev.target as HTMLInputElement).checked),
      });
      const label = el("label", {
        htmlFor: `asset-${key}`,
        text: ` ${asset.kind} from ${asset.ref_id}: ${asset.caption || "(no caption)"}`,
      });
      return el("li", { dataset: { asset: key } }, [checkbox, label]);
    });
    box.append(el("ul", { className: "asset-list" }, items));
    return box;
  }

  async save(): Promise<void> {
    await this.saveGate.run(async () => {
      const section = this.current();
      if (!section) {
        return;
      }
      const body = this.drafts.get(section.index) ?? section.body;
      try {
        const result = await this.cb.save(section.index, section.version, body);
        this.sections = this.sections.map((s) =>
          s.index === section.index
            ? { ...s, body, version: result.version, status: result.status }
            : s,
        );
        this.drafts.delete(section.index);
        this.render("");
      } catch (err) {
        if (isStale(err)) {
          this.cb.notify("Section changed elsewhere; reloading the latest draft.");
          await this.cb.reload();
        } else {
          this.render(err instanceof Error ? err.message : String(err));
        }
      }
    });
  }

  private async toggle(asset: AssetRow, enabled: boolean): Promise<void> {
    const result = await this.assetGate.run(async () => {
      try {
        await this.cb.toggleAsset(asset.ref_id, asset.asset_index, enabled);
        this.assets = this.assets.map((a) =>
          a.ref_id === asset.ref_id && a.asset_index === asset.asset_index
            ? { ...a, disabled: !enabled }
            : a,
        );
        return true;
      } catch (err) {
        this.cb.notify(err instanceof Error ? err.message : String(err));
        return false;
      }
    });
    if (result !== undefined) {
      this.render("");
    }
  }
}
