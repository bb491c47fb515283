import { describe, expect, it } from "vitest";
import {
  emptyNode,
  parseQuery,
  QueryParseError,
  serializeQuery,
  type QueryGraph,
  type QueryNode,
} from "../src/query.js";

function node(state: number, extra: Partial<QueryNode> = {}): QueryNode {
  return { ...emptyNode(state), ...extra };
}

describe("serializeQuery", () => {
  it("renders the four-node eventual chain", () => {
    const graph: QueryGraph = {
      nodes: [
        node(4, { initial: true }),
        node(5),
        node(6),
        node(7, { final: true }),
      ],
      edges: ["eventual", "eventual", "eventual"],
    };
    expect(serializeQuery(graph)).toBe("S4{initial} ~> S5 ~> S6 ~> S7{final}");
  });

  it("orders attributes canonically", () => {
    const graph: QueryGraph = {
      nodes: [node(2, { final: true, minAge: 12, maxAge: 60, minVisits: 3, initial: true })],
      edges: [],
    };
    expect(serializeQuery(graph)).toBe("S2{initial,final,min_age=12,max_age=60,min_visits=3}");
  });

  it("renders an empty graph as empty text", () => {
    expect(serializeQuery({ nodes: [], edges: [] })).toBe("");
  });
});

describe("parseQuery", () => {
  it("reads the four-node chain back", () => {
    const graph = parseQuery("S4{initial} ~> S5 ~> S6 ~> S7{final}");
    expect(graph.nodes.map((n) => n.state)).toEqual([4, 5, 6, 7]);
    expect(graph.nodes[0].initial).toBe(true);
    expect(graph.nodes[3].final).toBe(true);
    expect(graph.edges).toEqual(["eventual", "eventual", "eventual"]);
  });

  it("normalizes attribute order on round trip", () => {
    expect(serializeQuery(parseQuery("S2{min_visits=3,initial}"))).toBe(
      "S2{initial,min_visits=3}",
    );
  });

  it("accepts numeric attribute forms", () => {
    const graph = parseQuery("S1{min_age=2.5,max_age=1e2}");
    expect(graph.nodes[0].minAge).toBe(2.5);
    expect(graph.nodes[0].maxAge).toBe(100);
  });

  const failures: Array<[string, number]> = [
    ["", 0],
    ["S", 1],
    ["S1 -> -> S2", 6],
    ["S1{bogus}", 3],
    ["S1{initial,initial}", 11],
    ["S1{min_age=5,max_age=2}", 0],
    ["S1 S2", 3],
  ];
  for (const [text, offset] of failures) {
    it(`rejects ${JSON.stringify(text)} at offset ${offset}`, () => {
      let caught: unknown;
      try {
        parseQuery(text);
      } catch (err) {
        caught = err;
      }
      expect(caught).toBeInstanceOf(QueryParseError);
      expect((caught as QueryParseError).offset).toBe(offset);
    });
  }
});

describe("canvas text bijection", () => {
  it("holds on fixed canonical strings", () => {
    const texts = [
      "S0",
      "S1 -> S2",
      "S4{initial} ~> S5 ~> S6 ~> S7{final}",
      "S2{initial,max_age=60,min_visits=3} ~> S0",
      "S3{min_age=2.5} -> S3{min_age=2.5}",
    ];
    for (const text of texts) {
      expect(serializeQuery(parseQuery(text))).toBe(text);
    }
  });

  it("holds on generated graphs", () => {
    let seed = 20240817;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    const randInt = (bound: number) => Math.floor(rand() * bound);

    for (let trial = 0; trial < 200; trial++) {
      const nodes: QueryNode[] = [];
      const edges: QueryGraph["edges"] = [];
      const count = 1 + randInt(5);
      for (let i = 0; i < count; i++) {
        const item = node(randInt(13));
        if (rand() < 0.3) item.initial = true;
        if (rand() < 0.3) item.final = true;
        if (rand() < 0.4) item.minAge = randInt(240) / 2;
        if (rand() < 0.4) {
          const floor = item.minAge ?? 0;
          item.maxAge = floor + randInt(240) / 2;
        }
        if (rand() < 0.4) item.minVisits = 1 + randInt(6);
        nodes.push(item);
        if (i > 0) edges.push(rand() < 0.5 ? "direct" : "eventual");
      }
      const graph: QueryGraph = { nodes, edges };
      const text = serializeQuery(graph);
      const reparsed = parseQuery(text);
      expect(reparsed).toEqual(graph);
      expect(serializeQuery(reparsed)).toBe(text);
    }
  });
});
