// DOM wiring for the editor: grid canvas with node badges, node inspector,
// edge editor, undo/redo, import/export, and the layout/image previews.
// All graph logic lives in the tested modules; this file only renders state
// and translates UI events into GraphEdits.

import { ApiClient } from "./client.js";
import { EditorDocument, EditError } from "./document.js";
import type { GraphEdit } from "./edits.js";
import { PreviewController } from "./preview.js";
import type { VocabInfo } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (HTMLElement | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

export class EditorApp {
  private doc: EditorDocument;
  private preview: PreviewController;
  private selected: number | null = null;
  private edgeSubject: number | null = null;

  constructor(private root: HTMLElement, private vocab: VocabInfo, client: ApiClient) {
    this.doc = new EditorDocument(vocab);
    this.preview = new PreviewController(client, this.doc, {
      onLayout: () => this.renderPreviews(),
      onImage: () => this.renderPreviews(),
      onError: (msg) => this.showError(msg),
    });
    this.buildSkeleton();
    this.render();
  }

  private commit(edit: GraphEdit): void {
    try {
      this.doc.apply(edit);
      this.showError("");
      this.render();
      this.preview.schedule();
    } catch (err) {
      if (err instanceof EditError) this.showError(err.message);
      else throw err;
    }
  }

  private buildSkeleton(): void {
    this.root.innerHTML = "";
    this.root.append(
      el("div", { class: "toolbar", id: "toolbar" }),
      el("div", { class: "columns" },
        el("div", { class: "panel", id: "canvas" }),
        el("div", { class: "panel", id: "inspector" }),
        el("div", { class: "panel", id: "previews" }),
      ),
      el("div", { class: "error", id: "error" }),
    );
    this.buildToolbar();
  }

  private buildToolbar(): void {
    const bar = this.root.querySelector("#toolbar")!;
    const undo = el("button", {}, "Undo");
    undo.onclick = () => {
      if (this.doc.undo()) {
        this.render();
        this.renderPreviews();
      }
    };
    const redo = el("button", {}, "Redo");
    redo.onclick = () => {
      if (this.doc.redo()) {
        this.render();
        this.renderPreviews();
      }
    };
    const addNode = el("button", {}, "Add node");
    addNode.onclick = () =>
      this.commit({
        kind: "add_node",
        node: { class: this.vocab.object_classes[0], cell: 36, z: Math.floor(this.vocab.grid.depth_bins / 2) },
      });
    const exportBtn = el("button", {}, "Export");
    exportBtn.onclick = () => {
      const blob = new Blob([this.doc.exportDocument()], { type: "application/json" });
      const a = el("a", { href: URL.createObjectURL(blob), download: "scene-graph.json" });
      a.click();
    };
    const importInput = el("input", { type: "file", accept: ".json", style: "display:none" }) as HTMLInputElement;
    importInput.onchange = async () => {
      const file = importInput.files?.[0];
      if (!file) return;
      try {
        this.doc.importDocument(await file.text());
        this.showError("");
        this.render();
        this.preview.schedule();
      } catch (err) {
        this.showError(String((err as Error).message));
      }
    };
    const importBtn = el("button", {}, "Import");
    importBtn.onclick = () => importInput.click();
    const generateBtn = el("button", { class: "primary" }, "Generate image");
    generateBtn.onclick = () => void this.preview.generate();
    bar.append(undo, redo, addNode, importBtn, importInput, exportBtn, generateBtn);
  }

  private render(): void {
    this.renderCanvas();
    this.renderInspector();
  }

  private renderCanvas(): void {
    const canvas = this.root.querySelector("#canvas")!;
    canvas.innerHTML = "";
    const grid = el("div", { class: "grid", style: `--n:${this.vocab.grid.grid_size}` });
    const l = this.vocab.grid.grid_size;
    for (let cell = 0; cell < l * l; cell++) {
      const cellDiv = el("div", { class: "cell", "data-cell": String(cell) });
      cellDiv.onclick = () => {
        if (this.selected !== null) this.commit({ kind: "set_location", index: this.selected, cell });
      };
      grid.append(cellDiv);
    }
    this.doc.graph.nodes.forEach((node, i) => {
      const [r, g, b] = this.vocab.palette[node.class] ?? [128, 128, 128];
      const badge = el(
        "div",
        {
          class: "node" + (i === this.selected ? " selected" : ""),
          style: `background: rgb(${r},${g},${b})`,
          title: `${node.class} (z=${node.z})`,
        },
        `${node.class[0].toUpperCase()}${node.z}`,
      );
      badge.onclick = (ev) => {
        ev.stopPropagation();
        this.selected = i;
        this.render();
      };
      grid.children[node.cell].append(badge);
    });
    canvas.append(el("h3", {}, "Scene"), grid, this.renderEdgeList());
  }

  private renderEdgeList(): HTMLElement {
    const list = el("div", { class: "edges" }, el("h3", {}, "Relations"));
    this.doc.graph.edges.forEach((edge, k) => {
      const row = el("div", { class: "edge-row" });
      const label = el("span", {}, `#${edge.s} ${edge.r.replaceAll("_", " ")} #${edge.o}`);
      const select = el("select", {}) as HTMLSelectElement;
      for (const rel of this.vocab.relations) {
        const opt = el("option", { value: rel }, rel) as HTMLOptionElement;
        if (rel === edge.r) opt.selected = true;
        select.append(opt);
      }
      select.onchange = () => this.commit({ kind: "set_relation", index: k, relation: select.value });
      const remove = el("button", {}, "x");
      remove.onclick = () => this.commit({ kind: "remove_edge", index: k });
      row.append(label, select, remove);
      list.append(row);
    });
    const addRow = el("div", { class: "edge-row" });
    const subject = el("button", {}, this.edgeSubject === null ? "Pick subject" : `Subject #${this.edgeSubject}`);
    subject.onclick = () => {
      this.edgeSubject = this.selected;
      this.render();
    };
    const relSelect = el("select", { id: "new-edge-rel" }) as HTMLSelectElement;
    for (const rel of this.vocab.relations) relSelect.append(el("option", { value: rel }, rel));
    const connect = el("button", {}, "Relate to selected");
    connect.onclick = () => {
      if (this.edgeSubject === null || this.selected === null) {
        this.showError("pick a subject node, then select the object node");
        return;
      }
      this.commit({ kind: "add_edge", edge: { s: this.edgeSubject, r: relSelect.value, o: this.selected } });
    };
    addRow.append(subject, relSelect, connect);
    list.append(addRow);
    return list;
  }

  private renderInspector(): void {
    const panel = this.root.querySelector("#inspector")!;
    panel.innerHTML = "";
    panel.append(el("h3", {}, "Node inspector"));
    if (this.selected === null || this.selected >= this.doc.graph.nodes.length) {
      this.selected = null;
      panel.append(el("p", {}, "Select a node on the grid."));
      return;
    }
    const i = this.selected;
    const node = this.doc.graph.nodes[i];

    const classSelect = el("select", {}) as HTMLSelectElement;
    for (const name of this.vocab.classes) {
      const opt = el("option", { value: name }, name) as HTMLOptionElement;
      if (name === node.class) opt.selected = true;
      classSelect.append(opt);
    }
    classSelect.onchange = () => this.commit({ kind: "set_class", index: i, className: classSelect.value });

    const zSlider = el("input", {
      type: "range",
      min: "0",
      max: String(this.vocab.grid.depth_bins - 1),
      value: String(node.z),
    }) as HTMLInputElement;
    const zLabel = el("span", {}, ` z = ${node.z}`);
    zSlider.onchange = () => this.commit({ kind: "set_depth_bin", index: i, z: Number(zSlider.value) });

    const removeBtn = el("button", {}, "Remove node");
    removeBtn.onclick = () => {
      this.selected = null;
      this.commit({ kind: "remove_node", index: i });
    };

    panel.append(
      el("label", {}, "class ", classSelect),
      el("label", {}, "depth bin ", zSlider, zLabel),
      el("p", {}, `cell ${node.cell} (click the grid to move)`),
      removeBtn,
    );
  }

  private renderPreviews(): void {
    const panel = this.root.querySelector("#previews")!;
    panel.innerHTML = "";
    panel.append(el("h3", {}, "Layout preview"));
    const layout = this.doc.lastLayout;
    if (layout) {
      panel.append(el("img", { src: `data:image/png;base64,${layout.layout_png}`, class: "preview" }));
    } else {
      panel.append(el("p", {}, "No preview yet."));
    }
    panel.append(el("h3", {}, "Generated image"));
    const gen = this.doc.lastGenerate;
    if (gen) {
      panel.append(el("img", { src: `data:image/png;base64,${gen.image_png}`, class: "preview" }));
    } else {
      panel.append(el("p", {}, "Press “Generate image”."));
    }
  }

  private showError(message: string): void {
    const box = this.root.querySelector("#error")!;
    box.textContent = message;
  }
}

export async function bootstrap(rootId = "app"): Promise<void> {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`missing #${rootId} container`);
  const client = new ApiClient("");
  const vocab = await client.getVocab();
  new EditorApp(root, vocab, client);
}
