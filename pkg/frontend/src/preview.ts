// Debounced layout preview with a single in-flight request per endpoint.
// Cache hits (undo, redo, revisited states) never re-request; a newer edit
// aborts a stale in-flight preview. Image generation is on demand only.

import type { ApiClient } from "./client.js";
import { ApiError } from "./client.js";
import type { EditorDocument } from "./document.js";
import type { GenerateResponse, LayoutResponse } from "./types.js";

export interface PreviewEvents {
  onLayout?: (response: LayoutResponse) => void;
  onImage?: (response: GenerateResponse) => void;
  onError?: (message: string) => void;
}

export class PreviewController {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;
  private inflightKey: string | null = null;
  private lastRun: Promise<void> = Promise.resolve();
  private generating = false;

  constructor(
    private client: ApiClient,
    private doc: EditorDocument,
    private events: PreviewEvents = {},
    private delayMs = 150,
  ) {}

  /** Debounced refresh; rapid successive edits collapse into one request. */
  schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.lastRun = this.fire();
    }, this.delayMs);
  }

  /** Cancel the debounce window and refresh immediately. */
  flushNow(): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.lastRun = this.fire();
    return this.lastRun;
  }

  /** Resolves when the most recently started refresh settles. */
  idle(): Promise<void> {
    return this.lastRun;
  }

  private async fire(): Promise<void> {
    const key = this.doc.canonical();
    const cached = this.doc.previewCache.get(key);
    if (cached) {
      this.doc.storeLayout(key, cached);
      this.events.onLayout?.(cached);
      return;
    }
    if (this.inflightKey === key) return;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.inflightKey = key;
    try {
      const response = await this.client.layout(key, controller.signal);
      if (!controller.signal.aborted) {
        this.doc.storeLayout(key, response);
        this.events.onLayout?.(response);
      }
    } catch (err) {
      if (!controller.signal.aborted) {
        this.events.onError?.(err instanceof ApiError ? err.message : String(err));
      }
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
        this.inflightKey = null;
      }
    }
  }

  /** Expensive path, only on explicit demand; one at a time. */
  async generate(): Promise<void> {
    if (this.generating) return;
    this.generating = true;
    try {
      const response = await this.client.generate(this.doc.canonical());
      this.doc.lastGenerate = response;
      this.doc.storeLayout(this.doc.canonical(), response);
      this.events.onImage?.(response);
    } catch (err) {
      this.events.onError?.(err instanceof ApiError ? err.message : String(err));
    } finally {
      this.generating = false;
    }
  }
}
