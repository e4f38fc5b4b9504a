import { describe, expect, it } from "vitest";

import { applyEdit, checkEdit, type GraphEdit } from "../src/edits.js";
import { emptyGraph, type SceneGraphDoc } from "../src/types.js";
import { FAKE_VOCAB } from "./fakeserver.js";

function twoCars(): SceneGraphDoc {
  return {
    version: 1,
    classes: "default",
    nodes: [
      { class: "car", cell: 35, z: 4 },
      { class: "car", cell: 44, z: 4 },
    ],
    edges: [{ s: 0, r: "in_front_of", o: 1 }],
    meta: {},
  };
}

describe("checkEdit", () => {
  it("accepts legal edits", () => {
    expect(checkEdit(twoCars(), { kind: "set_depth_bin", index: 0, z: 7 }, FAKE_VOCAB)).toBeNull();
    expect(checkEdit(twoCars(), { kind: "set_relation", index: 0, relation: "behind" }, FAKE_VOCAB)).toBeNull();
  });

  it("blocks self edges", () => {
    expect(checkEdit(twoCars(), { kind: "add_edge", edge: { s: 1, r: "above", o: 1 } }, FAKE_VOCAB)).toMatch(
      /itself/,
    );
  });

  it("blocks duplicate edges and axis conflicts", () => {
    const dup = checkEdit(twoCars(), { kind: "add_edge", edge: { s: 0, r: "in_front_of", o: 1 } }, FAKE_VOCAB);
    expect(dup).toMatch(/already/);
    const axis = checkEdit(twoCars(), { kind: "add_edge", edge: { s: 1, r: "in_front_of", o: 0 } }, FAKE_VOCAB);
    expect(axis).toMatch(/axis/);
    const other = checkEdit(twoCars(), { kind: "add_edge", edge: { s: 0, r: "left_of", o: 1 } }, FAKE_VOCAB);
    expect(other).toBeNull();
  });

  it("blocks out-of-vocabulary names and ranges", () => {
    expect(checkEdit(twoCars(), { kind: "set_class", index: 0, className: "boat" }, FAKE_VOCAB)).toMatch(/boat/);
    expect(checkEdit(twoCars(), { kind: "set_location", index: 0, cell: 64 }, FAKE_VOCAB)).toMatch(/cell/);
    expect(checkEdit(twoCars(), { kind: "set_depth_bin", index: 0, z: 8 }, FAKE_VOCAB)).toMatch(/depth/);
    expect(checkEdit(twoCars(), { kind: "remove_node", index: 5 }, FAKE_VOCAB)).toMatch(/does not exist/);
  });

  it("never passes an edit the server would reject for client-checkable reasons", () => {
    // randomized agreement check between the client rule table and the
    // server-side validation mirrored in the fake server
    let seed = 42;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    const int = (n: number) => Math.floor(rand() * n);
    let graph = twoCars();
    const classes = [...FAKE_VOCAB.classes, "boat"];
    const relations = [...FAKE_VOCAB.relations, "orbits"];
    for (let i = 0; i < 500; i++) {
      const choice = int(6);
      const edit: GraphEdit =
        choice === 0
          ? { kind: "add_node", node: { class: classes[int(classes.length)], cell: int(70) - 3, z: int(10) - 1 } }
          : choice === 1
            ? { kind: "set_class", index: int(graph.nodes.length + 1), className: classes[int(classes.length)] }
            : choice === 2
              ? { kind: "set_depth_bin", index: int(graph.nodes.length + 1), z: int(10) - 1 }
              : choice === 3
                ? {
                    kind: "add_edge",
                    edge: {
                      s: int(graph.nodes.length + 1),
                      r: relations[int(relations.length)],
                      o: int(graph.nodes.length + 1),
                    },
                  }
                : choice === 4
                  ? { kind: "remove_edge", index: int(graph.edges.length + 1) }
                  : { kind: "set_relation", index: int(graph.edges.length + 1), relation: relations[int(relations.length)] };
      if (checkEdit(graph, edit, FAKE_VOCAB) === null) {
        graph = applyEdit(graph, edit, FAKE_VOCAB);
        // mirror of the server rules must find nothing wrong
        for (const node of graph.nodes) {
          expect(FAKE_VOCAB.classes).toContain(node.class);
          expect(node.cell).toBeGreaterThanOrEqual(0);
          expect(node.cell).toBeLessThan(64);
          expect(node.z).toBeGreaterThanOrEqual(0);
          expect(node.z).toBeLessThan(8);
        }
        const seen = new Set<string>();
        for (const e of graph.edges) {
          expect(e.s).not.toBe(e.o);
          const key = `${e.s}|${e.r}|${e.o}`;
          expect(seen.has(key)).toBe(false);
          seen.add(key);
        }
      }
    }
    expect(graph.nodes.length).toBeGreaterThan(2);
  });
});

describe("applyEdit", () => {
  it("remove_node cascades incident edges and reindexes", () => {
    const graph: SceneGraphDoc = {
      ...emptyGraph(),
      nodes: [
        { class: "car", cell: 1, z: 1 },
        { class: "bus", cell: 2, z: 2 },
        { class: "person", cell: 3, z: 3 },
      ],
      edges: [
        { s: 0, r: "left_of", o: 1 },
        { s: 2, r: "behind", o: 1 },
        { s: 0, r: "above", o: 2 },
      ],
    };
    const out = applyEdit(graph, { kind: "remove_node", index: 1 }, FAKE_VOCAB);
    expect(out.nodes.map((n) => n.class)).toEqual(["car", "person"]);
    expect(out.edges).toEqual([{ s: 0, r: "above", o: 1 }]);
  });

  it("does not mutate its input", () => {
    const graph = twoCars();
    const copy = JSON.stringify(graph);
    applyEdit(graph, { kind: "set_relation", index: 0, relation: "behind" }, FAKE_VOCAB);
    expect(JSON.stringify(graph)).toBe(copy);
  });
});
