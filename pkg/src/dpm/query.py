"""State-sequence query language and persisted cohorts.

A query is a chain of state nodes joined by direct (``->``) or eventual
(``~>``) edges, e.g. ``S4{initial} ~> S7{final}``. Matching runs against
the run-length-collapsed decoded state sequence of each subject, so
lingering in a state never breaks adjacency.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
from dataclasses import dataclass

from .errors import (
    BadAttrValue,
    DuplicateAttr,
    NotFound,
    QuerySyntaxError,
    StateOutOfRange,
)

ATTR_NAMES = ("initial", "final", "min_age", "max_age", "min_visits")


@dataclass(frozen=True)
class QueryNode:
    state: int
    initial: bool = False
    final: bool = False
    min_age: float | None = None
    max_age: float | None = None
    min_visits: int | None = None


@dataclass(frozen=True)
class StateQuery:
    nodes: tuple[QueryNode, ...]
    edges: tuple[str, ...]               # "direct" | "eventual", len = nodes-1


@dataclass(frozen=True)
class Run:
    """A maximal stretch of consecutive visits decoded to one state."""

    state: int
    first_age: float
    last_age: float
    n_visits: int


# --- parsing ----------------------------------------------------------------

class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self, n: int = 1) -> str:
        return self.text[self.pos:self.pos + n]

    def found(self) -> str:
        return self.text[self.pos] if not self.at_end() else "end of input"

    def fail(self, expected: list[str]):
        raise QuerySyntaxError(self.pos, expected, self.found())

    def take_int(self, expected: str) -> int:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            self.fail([expected])
        return int(self.text[start:self.pos])

    def _digits(self) -> int:
        n = 0
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
            n += 1
        return n

    def take_number(self) -> tuple[str, int]:
        """Unsigned decimal literal, optional fraction and exponent;
        returns (lexeme, start offset)."""
        start = self.pos
        whole = self._digits()
        frac = 0
        if self.peek() == ".":
            self.pos += 1
            frac = self._digits()
        if whole + frac == 0:
            self.pos = start
            self.fail(["number"])
        if self.peek() in ("e", "E"):
            mark = self.pos
            self.pos += 1
            if self.peek() in ("+", "-"):
                self.pos += 1
            if self._digits() == 0:
                self.pos = mark       # trailing "e" is not part of the number
        return self.text[start:self.pos], start

    def take_word(self) -> tuple[str, int]:
        start = self.pos
        while (self.pos < len(self.text)
               and (self.text[self.pos].isalpha() or self.text[self.pos] == "_")):
            self.pos += 1
        return self.text[start:self.pos], start


def _parse_attrs(sc: _Scanner) -> dict:
    attrs: dict = {}
    sc.pos += 1                          # consume "{"
    while True:
        sc.skip_ws()
        word, start = sc.take_word()
        if word not in ATTR_NAMES:
            sc.pos = start
            sc.fail(list(ATTR_NAMES))
        if word in attrs:
            raise DuplicateAttr(start, word)
        if word in ("initial", "final"):
            attrs[word] = True
        else:
            sc.skip_ws()
            if sc.peek() != "=":
                sc.fail(["="])
            sc.pos += 1
            sc.skip_ws()
            lexeme, at = sc.take_number()
            if word == "min_visits":
                if "." in lexeme or "e" in lexeme or "E" in lexeme:
                    raise BadAttrValue(at, word, "must be an integer")
                attrs[word] = int(lexeme)
            else:
                value = float(lexeme)
                if not math.isfinite(value):
                    raise BadAttrValue(at, word, "not a finite number")
                attrs[word] = value
        sc.skip_ws()
        if sc.peek() == ",":
            sc.pos += 1
            continue
        if sc.peek() == "}":
            sc.pos += 1
            return attrs
        sc.fail([",", "}"])


def _parse_node(sc: _Scanner) -> QueryNode:
    sc.skip_ws()
    if sc.peek() != "S":
        sc.fail(["state (S<index>)"])
    node_start = sc.pos
    sc.pos += 1
    state = sc.take_int("state index")
    attrs: dict = {}
    sc.skip_ws()
    if sc.peek() == "{":
        attrs = _parse_attrs(sc)
    if ("min_age" in attrs and "max_age" in attrs
            and attrs["min_age"] > attrs["max_age"]):
        raise BadAttrValue(node_start, "min_age", "exceeds max_age")
    return QueryNode(state=state, **attrs)


def parse_query(text: str) -> StateQuery:
    """Parse query text; raises QuerySyntaxError with the byte offset and
    expected tokens on malformed input."""
    sc = _Scanner(text)
    nodes = [_parse_node(sc)]
    edges: list[str] = []
    while True:
        sc.skip_ws()
        if sc.at_end():
            break
        two = sc.peek(2)
        if two == "->":
            edges.append("direct")
        elif two == "~>":
            edges.append("eventual")
        else:
            sc.fail(["->", "~>", "end of input"])
        sc.pos += 2
        nodes.append(_parse_node(sc))
    return StateQuery(nodes=tuple(nodes), edges=tuple(edges))


def render_query(query: StateQuery) -> str:
    """Canonical text for a query; ``parse_query(render_query(q))`` is
    structurally equal to ``q``."""
    parts = []
    for i, node in enumerate(query.nodes):
        attrs = []
        if node.initial:
            attrs.append("initial")
        if node.final:
            attrs.append("final")
        if node.min_age is not None:
            attrs.append(f"min_age={node.min_age!r}")
        if node.max_age is not None:
            attrs.append(f"max_age={node.max_age!r}")
        if node.min_visits is not None:
            attrs.append(f"min_visits={node.min_visits}")
        text = f"S{node.state}"
        if attrs:
            text += "{" + ",".join(attrs) + "}"
        if i > 0:
            parts.append("->" if query.edges[i - 1] == "direct" else "~>")
        parts.append(text)
    return " ".join(parts)


# --- matching ---------------------------------------------------------------

def collapse_runs(states, ages) -> list[Run]:
    """Merge maximal stretches of equal consecutive states."""
    if len(states) != len(ages):
        raise ValueError("states and ages must have equal length")
    runs: list[Run] = []
    for state, age in zip(states, ages):
        if runs and runs[-1].state == state:
            prev = runs[-1]
            runs[-1] = Run(state=prev.state, first_age=prev.first_age,
                           last_age=age, n_visits=prev.n_visits + 1)
        else:
            runs.append(Run(state=int(state), first_age=age,
                            last_age=age, n_visits=1))
    return runs


def _node_fits(node: QueryNode, runs: list[Run], r: int) -> bool:
    run = runs[r]
    if run.state != node.state:
        return False
    if node.initial and r != 0:
        return False
    if node.final and r != len(runs) - 1:
        return False
    if node.min_age is not None and run.first_age < node.min_age:
        return False
    if node.max_age is not None and run.first_age > node.max_age:
        return False
    if node.min_visits is not None and run.n_visits < node.min_visits:
        return False
    return True


def match_subject(query: StateQuery, runs: list[Run],
                  n_states: int | None = None) -> bool:
    """True iff the query chain can be placed on the run sequence: direct
    edges require adjacent runs, eventual edges any later run."""
    if n_states is not None:
        for node in query.nodes:
            if node.state >= n_states:
                raise StateOutOfRange(node.state, n_states)

    def search(j: int, r: int) -> bool:
        if j == len(query.nodes):
            return True
        if j == 0:
            candidates = range(len(runs))
        elif query.edges[j - 1] == "direct":
            candidates = range(r + 1, min(r + 2, len(runs)))
        else:
            candidates = range(r + 1, len(runs))
        return any(_node_fits(query.nodes[j], runs, c) and search(j + 1, c)
                   for c in candidates)

    return search(0, -1)


def evaluate(query: StateQuery, decodings, dataset) -> set[str]:
    """Subject ids whose decoded state sequence matches the query."""
    some = next(iter(decodings.values()))
    n_states = some.posteriors.shape[1]
    matched = set()
    for sid, subject in dataset.subjects.items():
        dec = decodings[sid]
        runs = collapse_runs(dec.states,
                             [v.age_months for v in subject.visits])
        if match_subject(query, runs, n_states=n_states):
            matched.add(sid)
    return matched


# --- cohorts ----------------------------------------------------------------

@dataclass(frozen=True)
class Cohort:
    cohort_id: str
    name: str
    query_text: str
    member_ids: frozenset[str]
    created_from_model: str

    def to_dict(self) -> dict:
        return {"cohort_id": self.cohort_id,
                "name": self.name,
                "query_text": self.query_text,
                "member_ids": sorted(self.member_ids),
                "created_from_model": self.created_from_model}

    @classmethod
    def from_dict(cls, d: dict) -> "Cohort":
        return cls(cohort_id=d["cohort_id"], name=d["name"],
                   query_text=d["query_text"],
                   member_ids=frozenset(d["member_ids"]),
                   created_from_model=d["created_from_model"])


class CohortStore:
    """One JSON file per cohort under ``<root>/cohorts``. Writes are
    serialized and atomic (write-then-rename); reads go straight to disk,
    so saved cohorts survive a process restart."""

    def __init__(self, data_dir: str):
        self.dir = os.path.join(data_dir, "cohorts")
        os.makedirs(self.dir, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, cohort_id: str) -> str:
        return os.path.join(self.dir, f"{cohort_id}.json")

    def save_cohort(self, name: str, query_text: str, member_ids,
                    model_id: str) -> Cohort:
        with self._write_lock:
            while True:
                cohort_id = uuid.uuid4().hex[:12]
                if not os.path.exists(self._path(cohort_id)):
                    break
            cohort = Cohort(cohort_id=cohort_id, name=name,
                            query_text=query_text,
                            member_ids=frozenset(member_ids),
                            created_from_model=model_id)
            tmp = self._path(cohort_id) + ".tmp"
            with open(tmp, "w", encoding="utf-8") as f:
                json.dump(cohort.to_dict(), f, sort_keys=True,
                          separators=(",", ":"))
                f.write("\n")
            os.replace(tmp, self._path(cohort_id))
        return cohort

    def get(self, cohort_id: str) -> Cohort:
        try:
            with open(self._path(cohort_id), encoding="utf-8") as f:
                return Cohort.from_dict(json.load(f))
        except FileNotFoundError:
            raise NotFound("cohort", cohort_id) from None

    def list_cohorts(self) -> list[Cohort]:
        cohorts = []
        for entry in sorted(os.listdir(self.dir)):
            if entry.endswith(".json"):
                cohorts.append(self.get(entry[:-5]))
        return cohorts

    def delete_cohort(self, cohort_id: str) -> None:
        with self._write_lock:
            try:
                os.remove(self._path(cohort_id))
            except FileNotFoundError:
                raise NotFound("cohort", cohort_id) from None
