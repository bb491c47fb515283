/**
 * Canvas-side model of a state-sequence query: a chain of state nodes with
 * optional attributes, joined by direct ("->") or eventual ("~>") edges.
 * serializeQuery produces the text the service parses; parseQuery reads the
 * same grammar back so a saved cohort's query can be loaded onto the canvas.
 */

export type EdgeKind = "direct" | "eventual";

export interface QueryNode {
  state: number;
  initial: boolean;
  final: boolean;
  minAge: number | null;
  maxAge: number | null;
  minVisits: number | null;
}

export interface QueryGraph {
  nodes: QueryNode[];
  /** edges[i] joins nodes[i] to nodes[i + 1]; length is nodes.length - 1. */
  edges: EdgeKind[];
}

export function emptyNode(state = 0): QueryNode {
  return { state, initial: false, final: false, minAge: null, maxAge: null, minVisits: null };
}

export function cloneGraph(graph: QueryGraph): QueryGraph {
  return {
    nodes: graph.nodes.map((n) => ({ ...n })),
    edges: [...graph.edges],
  };
}

export function serializeNode(node: QueryNode): string {
  const attrs: string[] = [];
  if (node.initial) attrs.push("initial");
  if (node.final) attrs.push("final");
  if (node.minAge !== null) attrs.push(`min_age=${node.minAge}`);
  if (node.maxAge !== null) attrs.push(`max_age=${node.maxAge}`);
  if (node.minVisits !== null) attrs.push(`min_visits=${node.minVisits}`);
  const suffix = attrs.length > 0 ? `{${attrs.join(",")}}` : "";
  return `S${node.state}${suffix}`;
}

export function serializeQuery(graph: QueryGraph): string {
  const parts: string[] = [];
  graph.nodes.forEach((node, i) => {
    if (i > 0) {
      parts.push(graph.edges[i - 1] === "direct" ? "->" : "~>");
    }
    parts.push(serializeNode(node));
  });
  return parts.join(" ");
}

export class QueryParseError extends Error {
  constructor(
    message: string,
    readonly offset: number,
  ) {
    super(`${message} at offset ${offset}`);
    this.name = "QueryParseError";
  }
}

const INT_RE = /^\d+/;
const NUM_RE = /^\d+(?:\.\d+)?(?:[eE][+-]?\d+)?/;
const WORD_RE = /^[A-Za-z_]+/;

class Scanner {
  pos = 0;

  constructor(private readonly text: string) {}

  skipWs(): void {
    while (this.pos < this.text.length && /\s/.test(this.text[this.pos])) {
      this.pos += 1;
    }
  }

  atEnd(): boolean {
    return this.pos >= this.text.length;
  }

  rest(): string {
    return this.text.slice(this.pos);
  }

  tryLiteral(literal: string): boolean {
    if (this.text.startsWith(literal, this.pos)) {
      this.pos += literal.length;
      return true;
    }
    return false;
  }

  match(re: RegExp, expected: string): string {
    const m = re.exec(this.rest());
    if (m === null) {
      this.fail(expected);
    }
    this.pos += m[0].length;
    return m[0];
  }

  fail(expected: string): never {
    const found = this.atEnd() ? "end of input" : `"${this.text[this.pos]}"`;
    throw new QueryParseError(`expected ${expected}, found ${found}`, this.pos);
  }
}

function parseAttrs(scanner: Scanner, node: QueryNode): void {
  const seen = new Set<string>();
  for (;;) {
    scanner.skipWs();
    const nameOffset = scanner.pos;
    const word = scanner.match(WORD_RE, "attribute name");
    if (seen.has(word)) {
      throw new QueryParseError(`duplicate attribute "${word}"`, nameOffset);
    }
    seen.add(word);
    switch (word) {
      case "initial":
        node.initial = true;
        break;
      case "final":
        node.final = true;
        break;
      case "min_age":
      case "max_age": {
        scanner.skipWs();
        if (!scanner.tryLiteral("=")) scanner.fail('"="');
        scanner.skipWs();
        const value = Number(scanner.match(NUM_RE, "number"));
        if (word === "min_age") node.minAge = value;
        else node.maxAge = value;
        break;
      }
      case "min_visits": {
        scanner.skipWs();
        if (!scanner.tryLiteral("=")) scanner.fail('"="');
        scanner.skipWs();
        node.minVisits = Number(scanner.match(INT_RE, "integer"));
        break;
      }
      default:
        throw new QueryParseError(`unknown attribute "${word}"`, nameOffset);
    }
    scanner.skipWs();
    if (scanner.tryLiteral(",")) continue;
    if (scanner.tryLiteral("}")) return;
    scanner.fail('"," or "}"');
  }
}

function parseNode(scanner: Scanner): QueryNode {
  const start = scanner.pos;
  if (!scanner.tryLiteral("S")) scanner.fail('"S"');
  const node = emptyNode(Number(scanner.match(INT_RE, "state number")));
  if (scanner.tryLiteral("{")) {
    parseAttrs(scanner, node);
  }
  if (node.minAge !== null && node.maxAge !== null && node.minAge > node.maxAge) {
    throw new QueryParseError("min_age exceeds max_age", start);
  }
  return node;
}

export function parseQuery(text: string): QueryGraph {
  const scanner = new Scanner(text);
  scanner.skipWs();
  const nodes: QueryNode[] = [parseNode(scanner)];
  const edges: EdgeKind[] = [];
  for (;;) {
    scanner.skipWs();
    if (scanner.atEnd()) break;
    if (scanner.tryLiteral("->")) edges.push("direct");
    else if (scanner.tryLiteral("~>")) edges.push("eventual");
    else scanner.fail('"->" or "~>"');
    scanner.skipWs();
    nodes.push(parseNode(scanner));
  }
  return { nodes, edges };
}
