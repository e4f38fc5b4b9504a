// Canonical serialization: recursively sorted keys, compact separators.
// Byte-compatible with the server's format, so a document can be used as a
// cache key and round-trips exactly.

import type { SceneGraphDoc } from "./types.js";

export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const entries = Object.keys(value as Record<string, unknown>)
    .sort()
    .map((k) => JSON.stringify(k) + ":" + canonicalJson((value as Record<string, unknown>)[k]));
  return "{" + entries.join(",") + "}";
}

export function serializeGraph(graph: SceneGraphDoc): string {
  return canonicalJson(graph);
}

export class GraphParseError extends Error {
  constructor(message: string, readonly where: string = "$") {
    super(`${where}: ${message}`);
  }
}

export function parseGraph(text: string): SceneGraphDoc {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new GraphParseError(`invalid JSON: ${(err as Error).message}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new GraphParseError("expected an object");
  }
  const doc = raw as Record<string, unknown>;
  if (doc.version !== 1) throw new GraphParseError(`unsupported version ${doc.version}`, "$.version");
  if (typeof doc.classes !== "string") throw new GraphParseError("classes must be a string", "$.classes");
  if (!Array.isArray(doc.nodes)) throw new GraphParseError("nodes must be an array", "$.nodes");
  if (!Array.isArray(doc.edges)) throw new GraphParseError("edges must be an array", "$.edges");
  if (typeof doc.meta !== "object" || doc.meta === null || Array.isArray(doc.meta)) {
    throw new GraphParseError("meta must be an object", "$.meta");
  }
  const nodes = doc.nodes.map((n, i) => {
    const where = `$.nodes[${i}]`;
    if (typeof n !== "object" || n === null) throw new GraphParseError("expected an object", where);
    const { class: cls, cell, z } = n as Record<string, unknown>;
    if (typeof cls !== "string") throw new GraphParseError("class must be a string", `${where}.class`);
    if (!Number.isInteger(cell)) throw new GraphParseError("cell must be an integer", `${where}.cell`);
    if (!Number.isInteger(z)) throw new GraphParseError("z must be an integer", `${where}.z`);
    return { class: cls, cell: cell as number, z: z as number };
  });
  const edges = doc.edges.map((e, i) => {
    const where = `$.edges[${i}]`;
    if (typeof e !== "object" || e === null) throw new GraphParseError("expected an object", where);
    const { s, r, o } = e as Record<string, unknown>;
    if (!Number.isInteger(s) || !Number.isInteger(o)) {
      throw new GraphParseError("edge endpoints must be integers", where);
    }
    if (typeof r !== "string") throw new GraphParseError("relation must be a string", `${where}.r`);
    if ((s as number) < 0 || (s as number) >= nodes.length || (o as number) < 0 || (o as number) >= nodes.length) {
      throw new GraphParseError(`edge endpoints (${s},${o}) out of range`, where);
    }
    return { s: s as number, r, o: o as number };
  });
  return {
    version: 1,
    classes: doc.classes,
    nodes,
    edges,
    meta: { ...(doc.meta as Record<string, unknown>) },
  };
}
