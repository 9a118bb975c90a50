import { beforeEach, expect, test } from "vitest";

import { ApiError } from "../src/api.js";
import { OutlineEditor, type OutlineCallbacks } from "../src/outlineEditor.js";
import { SectionEditor, type SectionCallbacks } from "../src/sectionEditor.js";
import type { AssetRow, OutlineView, SectionView } from "../src/types.js";
import { q, setInput } from "./support.js";

beforeEach(() => {
  document.body.innerHTML = "";
});

function mountHost(): HTMLElement {
  const host = document.createElement("div");
  document.body.appendChild(host);
  return host;
}

const OUTLINE: OutlineView = {
  text: "# Abstract\n# Introduction\n# Conclusion\n",
  version: 1,
  predefined: ["Abstract", "Introduction", "Conclusion"],
};

interface OutlineStub extends OutlineCallbacks {
  applied: { text: string; version: number }[];
  reloads: number;
  notices: string[];
}

function outlineStub(
  result: (text: string, version: number) => Promise<{ version: number; text: string }>,
): OutlineStub {
  const stub: OutlineStub = {
    applied: [],
    reloads: 0,
    notices: [],
    apply(text, version) {
      stub.applied.push({ text, version });
      return result(text, version);
    },
    async reload() {
      stub.reloads += 1;
    },
    notify(message) {
      stub.notices.push(message);
    },
  };
  return stub;
}

test("outline apply success advances the version and clears the draft", async () => {
  const host = mountHost();
  const stub = outlineStub(async (text) => ({ version: 2, text }));
  const editor = new OutlineEditor(host, stub);
  editor.setModel(OUTLINE, true);

  const textarea = q<HTMLTextAreaElement>(host, "#outline-text");
  setInput(textarea, OUTLINE.text + "## Added Detail\n");
  expect(editor.dirty).toBe(true);
  await editor.apply();

  expect(stub.applied).toEqual([
    { text: OUTLINE.text + "## Added Detail\n", version: 1 },
  ]);
  expect(editor.model?.version).toBe(2);
  expect(editor.dirty).toBe(false);
  expect(q<HTMLTextAreaElement>(host, "#outline-text").value).toContain("## Added Detail");
});

test("outline grammar errors stay inline and keep the draft text", async () => {
  const host = mountHost();
  const stub = outlineStub(async () => {
    throw new ApiError("OutlineSyntaxError", "line 4: level 3 skips below level 1", 422);
  });
  const editor = new OutlineEditor(host, stub);
  editor.setModel(OUTLINE, true);

  setInput(q<HTMLTextAreaElement>(host, "#outline-text"), "### bad start\n");
  await editor.apply();

  expect(q(host, ".editor-error").textContent).toContain("level 3 skips");
  expect(q<HTMLTextAreaElement>(host, "#outline-text").value).toBe("### bad start\n");
  expect(editor.model?.version).toBe(1);
  expect(stub.reloads).toBe(0);
});

test("outline stale version triggers a notify and a reload", async () => {
  const host = mountHost();
  const stub = outlineStub(async () => {
    throw new ApiError("StaleVersion", "outline is at version 5", 409);
  });
  const editor = new OutlineEditor(host, stub);
  editor.setModel(OUTLINE, true);

  await editor.apply();

  expect(stub.reloads).toBe(1);
  expect(stub.notices.length).toBe(1);
});

test("outline setModel keeps an unsaved draft while the server copy is unchanged", () => {
  const host = mountHost();
  const editor = new OutlineEditor(host, outlineStub(async (t) => ({ version: 2, text: t })));
  editor.setModel(OUTLINE, true);
  setInput(q<HTMLTextAreaElement>(host, "#outline-text"), "# Draft\n");

  editor.setModel(OUTLINE, true);
  expect(q<HTMLTextAreaElement>(host, "#outline-text").value).toBe("# Draft\n");

  editor.setModel({ ...OUTLINE, version: 2 }, true);
  expect(q<HTMLTextAreaElement>(host, "#outline-text").value).toBe(OUTLINE.text);
});

test("outline editor is read-only outside outline_ready", () => {
  const host = mountHost();
  const editor = new OutlineEditor(host, outlineStub(async (t) => ({ version: 2, text: t })));
  editor.setModel(OUTLINE, false);
  expect(q<HTMLTextAreaElement>(host, "#outline-text").disabled).toBe(true);
  expect(q<HTMLButtonElement>(host, "#btn-apply-outline").disabled).toBe(true);
});

// -- section editor ---------------------------------------------------------

const SECTIONS: SectionView[] = [
  {
    index: 0,
    title: "Abstract",
    status: "generated",
    version: 1,
    summary: "sum",
    body: "Overview **bold** [1].",
    warnings: [],
  },
  {
    index: 3,
    title: "Graph Studies",
    status: "generated",
    version: 1,
    summary: "sum",
    body: "Cluster section body [2].",
    warnings: ["diagram skipped"],
  },
];

const ASSETS: AssetRow[] = [
  { ref_id: "r2", asset_index: 0, kind: "table", caption: "Metric scores", disabled: false },
];

interface SectionStub extends SectionCallbacks {
  saves: { index: number; version: number; body: string }[];
  toggles: { refId: string; assetIndex: number; enabled: boolean }[];
  reloads: number;
  notices: string[];
  failWith?: ApiError;
}

function sectionStub(): SectionStub {
  const stub: SectionStub = {
    saves: [],
    toggles: [],
    reloads: 0,
    notices: [],
    async save(index, version, body) {
      stub.saves.push({ index, version, body });
      if (stub.failWith) {
        throw stub.failWith;
      }
      return { index, version: version + 1, status: "edited" };
    },
    async toggleAsset(refId, assetIndex, enabled) {
      stub.toggles.push({ refId, assetIndex, enabled });
    },
    async reload() {
      stub.reloads += 1;
    },
    notify(message) {
      stub.notices.push(message);
    },
  };
  return stub;
}

test("section list renders with status badges and a live preview", () => {
  const host = mountHost();
  const editor = new SectionEditor(host, sectionStub());
  editor.setModel(SECTIONS, ASSETS, true);

  expect(host.querySelectorAll(".section-list li").length).toBe(2);
  expect(q(host, ".section-preview").innerHTML).toContain("<strong>bold</strong>");
  expect(q(host, ".section-preview").innerHTML).toContain('<sup class="cite">[1]</sup>');

  setInput(q<HTMLTextAreaElement>(host, "#section-body"), "Rewritten *text*.");
  expect(q(host, ".section-preview").innerHTML).toContain("<em>text</em>");
});

test("saving a section records the edit and bumps the badge version", async () => {
  const host = mountHost();
  const stub = sectionStub();
  const editor = new SectionEditor(host, stub);
  editor.setModel(SECTIONS, ASSETS, true);

  setInput(q<HTMLTextAreaElement>(host, "#section-body"), "Hand-written intro.");
  await editor.save();

  expect(stub.saves).toEqual([{ index: 0, version: 1, body: "Hand-written intro." }]);
  const badge = q(host, '.section-list li[data-index="0"] .badge');
  expect(badge.textContent).toBe("edited v2");
});

test("stale section saves reload instead of overwriting", async () => {
  const host = mountHost();
  const stub = sectionStub();
  stub.failWith = new ApiError("StaleVersion", "section 0 is at version 4", 409);
  const editor = new SectionEditor(host, stub);
  editor.setModel(SECTIONS, ASSETS, true);

  setInput(q<HTMLTextAreaElement>(host, "#section-body"), "conflicting body");
  await editor.save();

  expect(stub.reloads).toBe(1);
  expect(stub.notices.length).toBe(1);
});

test("selecting another section switches the editor target", () => {
  const host = mountHost();
  const editor = new SectionEditor(host, sectionStub());
  editor.setModel(SECTIONS, ASSETS, true);

  q<HTMLElement>(host, '.section-list li[data-index="3"]').click();
  expect(editor.selectedIndex).toBe(3);
  expect(q<HTMLTextAreaElement>(host, "#section-body").value).toContain("Cluster section");
  expect(q(host, ".warnings").textContent).toContain("diagram skipped");
});

test("asset checkboxes issue one toggle per change", async () => {
  const host = mountHost();
  const stub = sectionStub();
  const editor = new SectionEditor(host, stub);
  editor.setModel(SECTIONS, ASSETS, true);

  const box = q<HTMLInputElement>(host, 'li[data-asset="r2:0"] input');
  expect(box.checked).toBe(true);
  box.checked = false;
  box.dispatchEvent(new Event("change", { bubbles: true }));
  await new Promise((resolve) => setTimeout(resolve, 0));

  expect(stub.toggles).toEqual([{ refId: "r2", assetIndex: 0, enabled: false }]);
  expect(q<HTMLInputElement>(host, 'li[data-asset="r2:0"] input').checked).toBe(false);
});

test("read-only mode disables the textarea, save, and toggles", () => {
  const host = mountHost();
  const editor = new SectionEditor(host, sectionStub());
  editor.setModel(SECTIONS, ASSETS, false);

  expect(q<HTMLTextAreaElement>(host, "#section-body").disabled).toBe(true);
  expect(q<HTMLButtonElement>(host, "#btn-save-section").disabled).toBe(true);
  expect(q<HTMLInputElement>(host, 'li[data-asset="r2:0"] input').disabled).toBe(true);
});
