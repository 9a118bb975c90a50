// Scatter canvas for the categorization step: one point per reference at
// its 2-D projection, colored by cluster. Dragging a point onto another
// cluster's region issues a single reassignment PATCH.

import { isStale } from "./api.js";
import { clear, el, svgEl } from "./dom.js";
import { MutationGate } from "./gate.js";
import type { ClusterView } from "./types.js";

export const CLUSTER_COLORS = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
];

export function colorFor(cluster: number): string {
  return CLUSTER_COLORS[((cluster % CLUSTER_COLORS.length) + CLUSTER_COLORS.length) % CLUSTER_COLORS.length];
}

export interface ClusterRegion {
  cluster: number;
  cx: number;
  cy: number;
  r: number;
}

export interface CanvasCallbacks {
  /** Issue the reassignment PATCH; resolves to the updated cluster view. */
  reassign(refId: string, target: number, version: number): Promise<ClusterView>;
  /** Refetch the session and push the fresh model back via setModel. */
  reload(): Promise<void>;
  notify(message: string): void;
}

interface DragState {
  refId: string;
  circle: SVGElement;
  startX: number;
  startY: number;
  origCx: number;
  origCy: number;
  moved: boolean;
}

const PAD = 40;
const POINT_R = 7;
const REGION_MIN_R = 28;
const REGION_PAD = 24;

export class ClusterCanvas {
  private readonly host: HTMLElement;
  private readonly cb: CanvasCallbacks;
  private readonly width: number;
  private readonly height: number;
  private readonly gate = new MutationGate();

  private view: ClusterView | null = null;
  private editable = true;
  private regionList: ClusterRegion[] = [];
  private drag: DragState | null = null;
  private errorBox: HTMLElement;
  private plot: HTMLElement;
  private legend: HTMLElement;
  private onMove = (ev: MouseEvent) => this.handleMove(ev);
  private onUp = (ev: MouseEvent) => this.handleUp(ev);

  constructor(host: HTMLElement, cb: CanvasCallbacks, width = 640, height = 420) {
    this.host = host;
    this.cb = cb;
    this.width = width;
    this.height = height;
    this.host.classList.add("cluster-canvas");
    this.plot = el("div", { className: "canvas-plot" });
    this.legend = el("div", { className: "canvas-legend" });
    this.errorBox = el("div", { className: "canvas-error" });
    this.host.append(this.plot, this.legend, this.errorBox);
  }

  get model(): ClusterView | null {
    return this.view;
  }

  get busy(): boolean {
    return this.gate.inFlight;
  }

  setModel(view: ClusterView | null, editable = true): void {
    this.view = view;
    this.editable = editable;
    this.errorBox.textContent = "";
    this.render();
  }

  /** Cluster whose region contains the pixel point, nearest center wins. */
  hitTest(px: number, py: number): number | null {
    let best: ClusterRegion | null = null;
    let bestDist = Infinity;
    for (const region of this.regionList) {
      const dist = Math.hypot(px - region.cx, py - region.cy);
      if (dist <= region.r && dist < bestDist) {
        best = region;
        bestDist = dist;
      }
    }
    return best ? best.cluster : null;
  }

  regionFor(cluster: number): ClusterRegion | undefined {
    return this.regionList.find((r) => r.cluster === cluster);
  }

  dispose(): void {
    this.cancelDrag();
    clear(this.host);
  }

  // -- rendering --------------------------------------------------------

  private scaled(): Map<string, { x: number; y: number }> {
    const view = this.view;
    const out = new Map<string, { x: number; y: number }>();
    if (!view) {
      return out;
    }
    const refs = Object.keys(view.coords2d);
    const xs = refs.map((r) => view.coords2d[r][0] ?? 0);
    const ys = refs.map((r) => view.coords2d[r][1] ?? 0);
    const minX = Math.min(...xs, 0);
    const maxX = Math.max(...xs, 0);
    const minY = Math.min(...ys, 0);
    const maxY = Math.max(...ys, 0);
    const sx = (this.width - 2 * PAD) / (maxX - minX || 1);
    const sy = (this.height - 2 * PAD) / (maxY - minY || 1);
    for (const ref of refs) {
      out.set(ref, {
        x: PAD + ((view.coords2d[ref][0] ?? 0) - minX) * sx,
        y: PAD + ((view.coords2d[ref][1] ?? 0) - minY) * sy,
      });
    }
    return out;
  }

  private computeRegions(points: Map<string, { x: number; y: number }>): ClusterRegion[] {
    const view = this.view;
    if (!view) {
      return [];
    }
    const members = new Map<number, { x: number; y: number }[]>();
    for (const [ref, cluster] of Object.entries(view.assignments)) {
      const pt = points.get(ref);
      if (!pt) {
        continue;
      }
      const list = members.get(cluster) ?? [];
      list.push(pt);
      members.set(cluster, list);
    }
    const regions: ClusterRegion[] = [];
    for (const [cluster, pts] of members) {
      const cx = pts.reduce((s, p) => s + p.x, 0) / pts.length;
      const cy = pts.reduce((s, p) => s + p.y, 0) / pts.length;
      const spread = Math.max(...pts.map((p) => Math.hypot(p.x - cx, p.y - cy)));
      regions.push({
        cluster,
        cx,
        cy,
        r: Math.max(REGION_MIN_R, spread + REGION_PAD),
      });
    }
    return regions.sort((a, b) => a.cluster - b.cluster);
  }

  private render(): void {
    this.cancelDrag();
    clear(this.plot);
    clear(this.legend);
    const view = this.view;
    if (!view) {
      this.plot.append(el("p", { className: "muted", text: "No cluster model yet." }));
      this.regionList = [];
      return;
    }
    const points = this.scaled();
    this.regionList = this.computeRegions(points);

    const svg = svgEl("svg", {
      width: String(this.width),
      height: String(this.height),
      viewBox: `0 0 ${this.width} ${this.height}`,
      class: this.editable ? "scatter editable" : "scatter",
    });
    for (const region of this.regionList) {
      svg.append(
        svgEl("circle", {
          class: "region",
          cx: String(region.cx),
          cy: String(region.cy),
          r: String(region.r),
          fill: colorFor(region.cluster),
          "fill-opacity": "0.10",
          stroke: colorFor(region.cluster),
          "stroke-dasharray": "4 3",
          "data-cluster": String(region.cluster),
        }),
      );
      const label = svgEl("text", {
        class: "region-label",
        x: String(region.cx),
        y: String(region.cy - region.r - 6),
        "text-anchor": "middle",
        fill: colorFor(region.cluster),
      });
      label.textContent = view.names[region.cluster] ?? `cluster ${region.cluster}`;
      svg.append(label);
    }
    for (const [ref, pt] of points) {
      const cluster = view.assignments[ref] ?? 0;
      const circle = svgEl("circle", {
        class: "point",
        cx: String(pt.x),
        cy: String(pt.y),
        r: String(POINT_R),
        fill: colorFor(cluster),
        stroke: "#ffffff",
        "stroke-width": "1.5",
        "data-ref": ref,
        "data-cluster": String(cluster),
      });
      if (this.editable) {
        circle.addEventListener("mousedown", (ev) =>
          this.handleDown(ev as MouseEvent, ref, circle),
        );
      }
      svg.append(circle);
    }
    this.plot.append(svg);

    const counts = new Map<number, number>();
    for (const cluster of Object.values(view.assignments)) {
      counts.set(cluster, (counts.get(cluster) ?? 0) + 1);
    }
    const items = view.names.map((name, idx) => {
      const swatch = el("span", { className: "swatch" });
      swatch.style.backgroundColor = colorFor(idx);
      return el("li", { dataset: { cluster: String(idx) } }, [
        swatch,
        `${name} (${counts.get(idx) ?? 0})`,
      ]);
    });
    this.legend.append(
      el("div", { className: "legend-title", text: `Criterion: ${view.criterion}` }),
      el("ul", {}, items),
      el("div", {
        className: "canvas-version",
        text: `version ${view.version}` + (this.editable ? ", drag points between clusters" : ""),
      }),
    );
  }

  // -- drag handling ------------------------------------------------------

  private handleDown(ev: MouseEvent, refId: string, circle: SVGElement): void {
    if (!this.editable || this.gate.inFlight || ev.button !== 0 || this.drag) {
      return;
    }
    this.drag = {
      refId,
      circle,
      startX: ev.clientX,
      startY: ev.clientY,
      origCx: Number(circle.getAttribute("cx")),
      origCy: Number(circle.getAttribute("cy")),
      moved: false,
    };
    circle.classList.add("dragging");
    const doc = this.host.ownerDocument;
    doc.addEventListener("mousemove", this.onMove);
    doc.addEventListener("mouseup", this.onUp);
    ev.preventDefault();
  }

  private handleMove(ev: MouseEvent): void {
    const drag = this.drag;
    if (!drag) {
      return;
    }
    const dx = ev.clientX - drag.startX;
    const dy = ev.clientY - drag.startY;
    if (Math.hypot(dx, dy) > 3) {
      drag.moved = true;
    }
    drag.circle.setAttribute("cx", String(drag.origCx + dx));
    drag.circle.setAttribute("cy", String(drag.origCy + dy));
  }

  private handleUp(ev: MouseEvent): void {
    const drag = this.drag;
    if (!drag) {
      return;
    }
    this.detachDragListeners();
    this.drag = null;
    drag.circle.classList.remove("dragging");
    const dropX = drag.origCx + (ev.clientX - drag.startX);
    const dropY = drag.origCy + (ev.clientY - drag.startY);
    const snapBack = () => {
      drag.circle.setAttribute("cx", String(drag.origCx));
      drag.circle.setAttribute("cy", String(drag.origCy));
    };
    if (!drag.moved || !this.view) {
      snapBack();
      return;
    }
    const target = this.hitTest(dropX, dropY);
    const current = this.view.assignments[drag.refId];
    if (target === null || target === current) {
      // outside every cluster region or unchanged: no request
      snapBack();
      return;
    }
    void this.gate.run(async () => {
      try {
        const updated = await this.cb.reassign(drag.refId, target, this.view!.version);
        this.setModel(updated, this.editable);
      } catch (err) {
        if (isStale(err)) {
          this.cb.notify("Clusters changed elsewhere; reloading the latest model.");
          await this.cb.reload();
        } else {
          snapBack();
          this.errorBox.textContent = err instanceof Error ? err.message : String(err);
        }
      }
    });
  }

  private detachDragListeners(): void {
    const doc = this.host.ownerDocument;
    doc.removeEventListener("mousemove", this.onMove);
    doc.removeEventListener("mouseup", this.onUp);
  }

  private cancelDrag(): void {
    if (this.drag) {
      this.drag.circle.classList.remove("dragging");
      this.detachDragListeners();
      this.drag = null;
    }
  }
}
