// Editor document: the current graph, undo/redo stacks over the GraphEdit
// algebra, and the preview cache keyed by the canonical serialization, so
// undo restores the previous preview without a new request.

import { parseGraph, serializeGraph } from "./canonical.js";
import { applyEdit, checkEdit, type GraphEdit } from "./edits.js";
import type { GenerateResponse, LayoutResponse, SceneGraphDoc, VocabInfo } from "./types.js";
import { emptyGraph } from "./types.js";

interface Command {
  edit: GraphEdit;
  before: SceneGraphDoc;
  after: SceneGraphDoc;
}

export class EditError extends Error {}

export class EditorDocument {
  graph: SceneGraphDoc;
  dirty = false;
  lastLayout: LayoutResponse | null = null;
  lastGenerate: GenerateResponse | null = null;
  readonly previewCache = new Map<string, LayoutResponse>();
  private undoStack: Command[] = [];
  private redoStack: Command[] = [];

  constructor(readonly vocab: VocabInfo, graph?: SceneGraphDoc) {
    this.graph = graph ?? emptyGraph(vocab.vocab_name);
  }

  canonical(): string {
    return serializeGraph(this.graph);
  }

  /** Apply an edit; throws EditError with the client-side reason if illegal. */
  apply(edit: GraphEdit): void {
    const reason = checkEdit(this.graph, edit, this.vocab);
    if (reason !== null) throw new EditError(reason);
    const before = this.graph;
    this.graph = applyEdit(this.graph, edit, this.vocab);
    this.undoStack.push({ edit, before, after: this.graph });
    this.redoStack.length = 0;
    this.dirty = true;
    this.syncPreviewFromCache();
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  undo(): boolean {
    const cmd = this.undoStack.pop();
    if (!cmd) return false;
    this.graph = cmd.before;
    this.redoStack.push(cmd);
    this.syncPreviewFromCache();
    return true;
  }

  redo(): boolean {
    const cmd = this.redoStack.pop();
    if (!cmd) return false;
    this.graph = cmd.after;
    this.undoStack.push(cmd);
    this.syncPreviewFromCache();
    return true;
  }

  /** Record a layout response for the current graph state. */
  storeLayout(key: string, response: LayoutResponse): void {
    this.previewCache.set(key, response);
    if (key === this.canonical()) this.lastLayout = response;
  }

  cachedLayout(): LayoutResponse | null {
    return this.previewCache.get(this.canonical()) ?? null;
  }

  private syncPreviewFromCache(): void {
    this.lastLayout = this.cachedLayout();
    this.lastGenerate = null;
  }

  exportDocument(): string {
    return this.canonical();
  }

  importDocument(text: string): void {
    const graph = parseGraph(text);
    this.graph = graph;
    this.undoStack = [];
    this.redoStack = [];
    this.dirty = false;
    this.syncPreviewFromCache();
  }
}
