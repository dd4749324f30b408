"""Word-level syntactic graphs derived from constituency and dependency parses.

Both views share the token set as their nodes.  The dependency view labels
each node with its inbound relation and mirrors the tree's edges.  The
constituency view labels each node with the tag path from the tree root down
to the word, and flattens phrase-level structure into word-to-word edges:

  1. each multi-word noun phrase links its first and last word (type NP);
  2. a preterminal word links to the first word of every phrasal sibling,
     typed by the parent tag (variant v2 targets the sibling's last word);
  3. each multi-word clause links its first and last word (type = clause tag);
  4. edges spanning more than ``max_distance`` token positions are dropped
     (variant v3 keeps them).

Variant v1 keeps the edge rules but truncates every node label to the last
tag of its path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import ConstituencyTree, ParsedSentence, ROOT_HEAD

DEP_VIEW = "dep"
CONST_VIEW = "const"
ROOT_LABEL = "ROOT"

VARIANTS = ("paper", "v1", "v2", "v3")

DEFAULT_CLAUSE_TAGS = frozenset({"S", "SBAR", "SINV", "SQ"})
# PTB punctuation preterminals never act as the word side of rule 2: they head
# nothing, and linking them produces edges absent from the reference graphs.
DEFAULT_PUNCT_TAGS = frozenset({".", ",", ":", "``", "''", "-LRB-", "-RRB-"})


class UnknownFormat(ValueError):
    pass


@dataclass(frozen=True)
class FlattenConfig:
    max_distance: int = 8
    variant: str = "paper"
    clause_tags: frozenset = DEFAULT_CLAUSE_TAGS
    punct_tags: frozenset = DEFAULT_PUNCT_TAGS

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.max_distance < 1:
            raise ValueError("max_distance must be >= 1")


@dataclass(eq=False)
class SyntacticGraph:
    """Shared word nodes with view-specific labels and typed edges.

    ``node_labels`` holds one deprel string per node in the dep view and one
    tag path (list of strings) per node in the const view.  ``edges`` stores
    canonical (i, j, type) triples with i < j; ``adjacency`` is the symmetric
    boolean matrix with self-loops, used for message passing.
    """

    view: str
    n: int
    node_labels: list
    edges: frozenset
    adjacency: np.ndarray = field(repr=False)


def _adjacency_from_edges(n: int, edges) -> np.ndarray:
    adj = np.eye(n, dtype=bool)
    for i, j, _ in edges:
        adj[i, j] = True
        adj[j, i] = True
    return adj


def build_dep_graph(s: ParsedSentence) -> SyntacticGraph:
    """Dependency view: inbound deprel as node label, one edge per head link."""
    dep = s.dep_rows
    n = len(s.tokens)
    labels = [ROOT_LABEL if h == ROOT_HEAD else d
              for h, d in zip(dep.heads, dep.deprels)]
    edges = set()
    for i, h in enumerate(dep.heads):
        if h == ROOT_HEAD:
            continue
        a, b = (h, i) if h < i else (i, h)
        edges.add((a, b, dep.deprels[i]))
    return SyntacticGraph(view=DEP_VIEW, n=n, node_labels=labels,
                          edges=frozenset(edges),
                          adjacency=_adjacency_from_edges(n, edges))


def build_const_paths(tree: ConstituencyTree) -> list[list[str]]:
    """Per-token list of internal constituent tags from the root to the word.

    Preterminal POS tags are excluded: the path stops at the phrase level.
    """
    n = tree.n_leaves
    paths: list[list[str]] = [None] * n

    def visit(nid: int, prefix: list[str]):
        node = tree.nodes[nid]
        if node.is_preterminal:
            paths[node.leaf] = list(prefix)
            return
        prefix.append(node.tag)
        for c in node.children:
            visit(c, prefix)
        prefix.pop()

    visit(tree.root, [])
    return paths


def flatten_const_relations(tree: ConstituencyTree, cfg: FlattenConfig | None = None) -> frozenset:
    """Flatten phrase structure into typed word-to-word edges (rules 1-4)."""
    cfg = cfg or FlattenConfig()
    edges: set[tuple[int, int, str]] = set()

    def add(i: int, j: int, etype: str):
        if i == j:
            return
        if i > j:
            i, j = j, i
        edges.add((i, j, etype))

    for nid, node in enumerate(tree.nodes):
        if node.is_preterminal:
            continue
        first, last = tree.token_span(nid)
        # rule 1: NP boundary
        if node.tag == "NP" and last > first:
            add(first, last, "NP")
        # rule 3: clause boundary
        if node.tag in cfg.clause_tags and last > first:
            add(first, last, node.tag)
        # rule 2: word child to first (v2: last) word of each phrasal sibling
        word_children = [c for c in node.children
                         if tree.nodes[c].is_preterminal
                         and tree.nodes[c].tag not in cfg.punct_tags]
        phrase_children = [c for c in node.children
                           if not tree.nodes[c].is_preterminal]
        for w in word_children:
            widx = tree.nodes[w].leaf
            for p in phrase_children:
                pfirst, plast = tree.token_span(p)
                target = plast if cfg.variant == "v2" else pfirst
                add(widx, target, node.tag)

    if cfg.variant != "v3":
        edges = {(i, j, t) for i, j, t in edges if j - i <= cfg.max_distance}
    return frozenset(edges)


def build_const_graph(s: ParsedSentence, cfg: FlattenConfig | None = None) -> SyntacticGraph:
    cfg = cfg or FlattenConfig()
    paths = build_const_paths(s.const_tree)
    if cfg.variant == "v1":
        paths = [p[-1:] for p in paths]
    edges = flatten_const_relations(s.const_tree, cfg)
    n = len(s.tokens)
    return SyntacticGraph(view=CONST_VIEW, n=n, node_labels=paths,
                          edges=edges,
                          adjacency=_adjacency_from_edges(n, edges))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _label_str(label) -> str:
    return "-".join(label) if isinstance(label, list) else str(label)


def export_graph(g: SyntacticGraph, format: str, tokens: list[str] | None = None) -> str:
    """Deterministic serialization of a graph as JSON or Graphviz DOT."""
    sorted_edges = sorted(g.edges)
    if format == "json":
        payload = {
            "view": g.view,
            "nodes": [{"i": i, "label": g.node_labels[i]} for i in range(g.n)],
            "edges": [{"i": i, "j": j, "type": t} for i, j, t in sorted_edges],
        }
        return json.dumps(payload, indent=None, separators=(",", ":"))
    if format == "dot":
        def esc(text: str) -> str:
            return text.replace("\\", "\\\\").replace('"', '\\"')

        lines = [f"graph {g.view} {{"]
        for i in range(g.n):
            label = _label_str(g.node_labels[i])
            if tokens is not None:
                label = f"{esc(tokens[i])}\\n{esc(label)}"
            else:
                label = esc(label)
            lines.append(f'  n{i} [label="{label}"];')
        for i, j, t in sorted_edges:
            lines.append(f'  n{i} -- n{j} [label="{esc(t)}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise UnknownFormat(f"unknown graph format {format!r}")
