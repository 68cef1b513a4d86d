"""
Reader/writer for the Bayesian Interchange Format (BIF 0.15 dialect).

Supported blocks::

    network <name> { ... }
    variable <name> { type discrete [ k ] { l1, l2, ... }; ... }
    probability ( A | B, C ) { table p...; }
    probability ( A | B, C ) { (b, c) p1, p2; ... default p1, p2; }

For a ``table`` entry with parents, values are laid out with the child's
category varying slowest and the parent configuration (last parent
fastest) varying within it, which is how the BnLearn files are written.

Category labels map to indices in the order they are declared.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .graph import Dag, is_acyclic
from .scm import CategoricalScm, Cpt

BUNDLED = ("asia", "cancer", "earthquake")


class BifError(ValueError):
    def __init__(self, message, line=None, col=None):
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.col = col


@dataclass
class ProbabilityBlock:
    target: str
    parents: list[str]
    table: Optional[list[float]] = None
    rows: dict[tuple[str, ...], list[float]] = field(default_factory=dict)
    default: Optional[list[float]] = None


@dataclass
class BifDocument:
    name: str
    variables: dict[str, list[str]]
    probabilities: list[ProbabilityBlock]
    warnings: list[str] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, BifDocument):
            return NotImplemented
        return (
            self.name == other.name
            and self.variables == other.variables
            and self.probabilities == other.probabilities
        )


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<punct>[{}()\[\];,|])
  | (?P<word>"[^"]*"|[^\s{}()\[\];,|"]+)
    """,
    re.VERBOSE | re.DOTALL,
)


def _tokenize(text: str):
    pos, line, col = 0, 1, 1
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise BifError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind in ("punct", "word"):
            tokens.append((value.strip('"') if kind == "word" else value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def where(self):
        if self.i < len(self.toks):
            return self.toks[self.i][1:]
        if self.toks:
            return self.toks[-1][1:]
        return (1, 1)

    def next(self):
        if self.i >= len(self.toks):
            raise BifError("unexpected end of input", *self.where())
        tok = self.toks[self.i][0]
        self.i += 1
        return tok

    def expect(self, value):
        line, col = self.where()
        tok = self.next()
        if tok != value:
            raise BifError(f"expected {value!r}, found {tok!r}", line, col)

    def skip_block(self):
        """Skip a balanced ``{ ... }`` block, or up to the next ``;``."""
        depth = 0
        while True:
            tok = self.next()
            if tok == "{":
                depth += 1
            elif tok == "}":
                depth -= 1
                if depth == 0:
                    return
            elif tok == ";" and depth == 0:
                return

    def number(self):
        line, col = self.where()
        tok = self.next()
        try:
            return float(tok)
        except ValueError:
            raise BifError(f"expected a number, found {tok!r}", line, col) from None

    def numbers_until_semicolon(self):
        values = []
        while self.peek() != ";":
            values.append(self.number())
            if self.peek() == ",":
                self.next()
        self.expect(";")
        return values


def parse_bif(text: str) -> BifDocument:
    """Parse BIF source into a :class:`BifDocument`.

    Unknown top-level directives and unknown entries inside blocks are
    skipped and reported in ``doc.warnings``.
    """
    p = _Parser(text)
    name = "unknown"
    variables: dict[str, list[str]] = {}
    blocks: list[ProbabilityBlock] = []
    warnings: list[str] = []
    block_pos = []

    while p.peek() is not None:
        line, col = p.where()
        kw = p.next()
        if kw == "network":
            name = p.next()
            p.skip_block()
        elif kw == "variable":
            var = p.next()
            p.expect("{")
            labels = None
            while p.peek() != "}":
                entry = p.next()
                if entry == "type":
                    kind = p.next()
                    if kind != "discrete":
                        raise BifError(f"variable {var!r}: unsupported type {kind!r}", line, col)
                    p.expect("[")
                    k = int(p.number())
                    p.expect("]")
                    p.expect("{")
                    labels = []
                    while p.peek() != "}":
                        labels.append(p.next())
                        if p.peek() == ",":
                            p.next()
                    p.expect("}")
                    p.expect(";")
                    if len(labels) != k:
                        raise BifError(
                            f"variable {var!r} declares {k} states but lists {len(labels)}", line, col
                        )
                elif entry == "property":
                    while p.next() != ";":
                        pass
                else:
                    warnings.append(f"line {line}: skipped entry {entry!r} in variable {var!r}")
                    while p.next() != ";":
                        pass
            p.expect("}")
            if labels is None:
                raise BifError(f"variable {var!r} has no type declaration", line, col)
            variables[var] = labels
        elif kw == "probability":
            p.expect("(")
            target = p.next()
            parents = []
            if p.peek() == "|":
                p.next()
                while p.peek() != ")":
                    parents.append(p.next())
                    if p.peek() == ",":
                        p.next()
            p.expect(")")
            p.expect("{")
            block = ProbabilityBlock(target, parents)
            while p.peek() != "}":
                eline, ecol = p.where()
                tok = p.peek()
                if tok == "table":
                    p.next()
                    block.table = p.numbers_until_semicolon()
                elif tok == "default":
                    p.next()
                    block.default = p.numbers_until_semicolon()
                elif tok == "(":
                    p.next()
                    key = []
                    while p.peek() != ")":
                        key.append(p.next())
                        if p.peek() == ",":
                            p.next()
                    p.expect(")")
                    block.rows[tuple(key)] = p.numbers_until_semicolon()
                elif tok == "property":
                    while p.next() != ";":
                        pass
                else:
                    warnings.append(f"line {eline}: skipped entry {tok!r} in probability block")
                    while p.next() != ";":
                        pass
            p.expect("}")
            blocks.append(block)
            block_pos.append((line, col))
        else:
            warnings.append(f"line {line}: skipped unknown directive {kw!r}")
            p.skip_block()

    for block, (line, col) in zip(blocks, block_pos):
        _check_block(block, variables, line, col)
    return BifDocument(name, variables, blocks, warnings)


def _check_block(block, variables, line, col):
    for v in [block.target, *block.parents]:
        if v not in variables:
            raise BifError(f"probability block references undeclared variable {v!r}", line, col)
    k = len(variables[block.target])
    pcards = [len(variables[q]) for q in block.parents]
    if block.table is not None:
        expected = k * int(np.prod(pcards)) if pcards else k
        if len(block.table) != expected:
            raise BifError(
                f"table for {block.target!r} has {len(block.table)} entries, expected {expected}",
                line,
                col,
            )
    for key, row in block.rows.items():
        if len(key) != len(block.parents):
            raise BifError(f"row key {key} for {block.target!r} has the wrong arity", line, col)
        for q, label in zip(block.parents, key):
            if label not in variables[q]:
                raise BifError(f"unknown state {label!r} of {q!r}", line, col)
        if len(row) != k:
            raise BifError(
                f"row {key} for {block.target!r} has {len(row)} entries, expected {k}", line, col
            )
    if block.default is not None and len(block.default) != k:
        raise BifError(f"default row for {block.target!r} has the wrong length", line, col)


def _block_matrix(block: ProbabilityBlock, variables) -> np.ndarray:
    """Rows over parent configurations in ``block.parents`` order, last parent fastest."""
    k = len(variables[block.target])
    pcards = [len(variables[q]) for q in block.parents]
    nrows = int(np.prod(pcards)) if pcards else 1
    if block.table is not None:
        return np.array(block.table, dtype=float).reshape(k, nrows).T.copy()
    out = np.empty((nrows, k))
    for r, key in enumerate(itertools.product(*[variables[q] for q in block.parents])):
        if key in block.rows:
            out[r] = block.rows[key]
        elif block.default is not None:
            out[r] = block.default
        else:
            raise BifError(f"no entry for configuration {key} of {block.target!r}")
    return out


def to_scm(doc: BifDocument) -> CategoricalScm:
    """Convert a parsed document to a model.

    Node indices follow variable declaration order; each CPT is re-indexed
    so its parents appear in ascending node order.
    """
    names = list(doc.variables)
    index = {v: i for i, v in enumerate(names)}
    cards = [len(doc.variables[v]) for v in names]
    n = len(names)
    by_target = {}
    for block in doc.probabilities:
        if block.target in by_target:
            raise BifError(f"duplicate probability block for {block.target!r}")
        by_target[block.target] = block
    missing = [v for v in names if v not in by_target]
    if missing:
        raise BifError(f"no probability block for {missing}")

    adj = np.zeros((n, n), dtype=np.int8)
    for block in doc.probabilities:
        for q in block.parents:
            adj[index[q], index[block.target]] = 1
    if not is_acyclic(adj):
        raise BifError("network structure is cyclic")

    cpts = []
    for j, v in enumerate(names):
        block = by_target[v]
        mat = _block_matrix(block, doc.variables)
        order = sorted(range(len(block.parents)), key=lambda t: index[block.parents[t]])
        pcards = [cards[index[q]] for q in block.parents]
        if pcards:
            mat = mat.reshape(*pcards, cards[j]).transpose(*order, len(pcards)).reshape(-1, cards[j])
        parent_ids = tuple(index[block.parents[t]] for t in order)
        cpts.append(Cpt(j, parent_ids, tuple(cards[p] for p in parent_ids), cards[j], mat))
    labels = tuple(tuple(doc.variables[v]) for v in names)
    return CategoricalScm(Dag(adj), tuple(cpts), tuple(cards), names=tuple(names), labels=labels)


def from_scm(scm: CategoricalScm, name: str = "unknown") -> BifDocument:
    """Inverse of :func:`to_scm`, emitting per-row entries."""
    labels = scm.labels or tuple(tuple(str(c) for c in range(k)) for k in scm.cardinalities)
    variables = {scm.names[i]: list(labels[i]) for i in range(scm.n)}
    blocks = []
    for cpt in scm.cpts:
        parents = [scm.names[p] for p in cpt.parent_ids]
        block = ProbabilityBlock(scm.names[cpt.node], parents)
        if not parents:
            block.table = [float(v) for v in cpt.table[0]]
        else:
            keys = itertools.product(*[labels[p] for p in cpt.parent_ids])
            for key, row in zip(keys, cpt.table):
                block.rows[tuple(key)] = [float(v) for v in row]
        blocks.append(block)
    return BifDocument(name, variables, blocks)


def serialize_bif(doc: BifDocument) -> str:
    out = [f"network {doc.name} {{\n}}\n"]
    for v, labels in doc.variables.items():
        out.append(
            f"variable {v} {{\n  type discrete [ {len(labels)} ] {{ {', '.join(labels)} }};\n}}\n"
        )
    for b in doc.probabilities:
        head = b.target if not b.parents else f"{b.target} | {', '.join(b.parents)}"
        out.append(f"probability ( {head} ) {{\n")
        if b.table is not None:
            out.append(f"  table {', '.join(repr(x) for x in b.table)};\n")
        for key, row in b.rows.items():
            out.append(f"  ({', '.join(key)}) {', '.join(repr(x) for x in row)};\n")
        if b.default is not None:
            out.append(f"  default {', '.join(repr(x) for x in b.default)};\n")
        out.append("}\n")
    return "".join(out)


def load_bif(path) -> BifDocument:
    path = Path(path)
    if path.suffix == ".gz":
        import gzip

        text = gzip.decompress(path.read_bytes()).decode()
    else:
        text = path.read_text()
    return parse_bif(text)


def load_network(name: str) -> CategoricalScm:
    """Load one of the bundled networks (``asia``, ``cancer``, ``earthquake``)."""
    if name not in BUNDLED:
        raise ValueError(f"no bundled network {name!r}; pass a .bif path instead")
    text = resources.files("causalprobe.data").joinpath(f"{name}.bif").read_text()
    return to_scm(parse_bif(text))


def summary(scm: CategoricalScm) -> dict:
    indeg = scm.dag.adj.sum(axis=0)
    return {
        "nodes": scm.n,
        "edges": int(scm.dag.adj.sum()),
        "max_in_degree": int(indeg.max()) if scm.n else 0,
    }
