"""Corpus loading: parsed sentences, gold tuples and per-verb tagging instances.

Input sentences arrive fully parsed (tokens, bracketed constituency tree,
dependency rows, verb indices, optional gold tuples).  This module validates
them and expands each sentence into one BIO-labelled instance per candidate
verb.  Tokenization is taken as given and never altered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

ROOT_HEAD = -1  # head sentinel for the dependency root
REL = "REL"
DEFAULT_MAX_ARG = 5


class CorpusError(Exception):
    """Base class for all corpus validation failures."""


class UnbalancedBrackets(CorpusError):
    pass


class EmptyTree(CorpusError):
    pass


class MalformedTree(CorpusError):
    pass


class LeafCountMismatch(CorpusError):
    pass


class MissingRoot(CorpusError):
    pass


class MultipleRoots(CorpusError):
    pass


class CyclicHeads(CorpusError):
    pass


class BadColumnCount(CorpusError):
    pass


class UnsupportedConlluNode(CorpusError):
    pass


class OverlappingGoldSpans(CorpusError):
    pass


class SchemaViolation(CorpusError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class AlignmentError(CorpusError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Token:
    index: int
    surface: str

    @property
    def lowercased(self) -> str:
        return self.surface.lower()

    def __post_init__(self):
        if not self.surface:
            raise CorpusError(f"empty token surface at index {self.index}")


@dataclass(frozen=True)
class ConstNode:
    """One constituency-tree node: internal (children) or preterminal (leaf).

    Exactly one of ``children`` / ``leaf`` is set.  ``leaf`` is the 0-based
    token index covered by a preterminal POS node.
    """

    tag: str
    children: Optional[tuple[int, ...]] = None
    leaf: Optional[int] = None

    @property
    def is_preterminal(self) -> bool:
        return self.leaf is not None


@dataclass(frozen=True)
class ConstituencyTree:
    nodes: tuple[ConstNode, ...]
    root: int

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_preterminal)

    def leaf_ids_in_order(self) -> list[int]:
        """Preterminal node ids visited left to right."""
        order = []

        def visit(nid: int):
            node = self.nodes[nid]
            if node.is_preterminal:
                order.append(nid)
            else:
                for c in node.children:
                    visit(c)

        visit(self.root)
        return order

    def token_span(self, nid: int) -> tuple[int, int]:
        """Inclusive (first, last) token indices covered by node ``nid``."""
        node = self.nodes[nid]
        if node.is_preterminal:
            return node.leaf, node.leaf
        first = self.token_span(node.children[0])[0]
        last = self.token_span(node.children[-1])[1]
        return first, last


@dataclass(frozen=True)
class DependencyRows:
    """Per-token (head, deprel) with 0-based heads and ROOT_HEAD sentinel."""

    heads: tuple[int, ...]
    deprels: tuple[str, ...]

    def __post_init__(self):
        n = len(self.heads)
        if len(self.deprels) != n:
            raise CorpusError("heads and deprels length mismatch")
        roots = [i for i, h in enumerate(self.heads) if h == ROOT_HEAD]
        if not roots:
            raise MissingRoot("no token has the ROOT head sentinel")
        if len(roots) > 1:
            raise MultipleRoots(f"tokens {roots} all claim the root")
        for i, h in enumerate(self.heads):
            if h != ROOT_HEAD and not (0 <= h < n):
                raise CyclicHeads(f"token {i} has out-of-range head {h}")
            if h == i:
                raise CyclicHeads(f"token {i} is its own head")
        # every token must reach the root without revisiting a node
        for i in range(n):
            seen = set()
            j = i
            while j != ROOT_HEAD:
                if j in seen:
                    raise CyclicHeads(f"head cycle through token {i}")
                seen.add(j)
                j = self.heads[j]

    @property
    def root_index(self) -> int:
        return self.heads.index(ROOT_HEAD)


@dataclass(frozen=True)
class Extraction:
    """One relational tuple: role -> inclusive token span, plus confidence."""

    spans: dict[str, tuple[int, int]]
    indicator_verb: int
    confidence: float = 1.0

    def __post_init__(self):
        if REL not in self.spans:
            raise CorpusError("tuple lacks a REL span")
        if not 0.0 < self.confidence <= 1.0:
            raise CorpusError(f"confidence {self.confidence} outside (0, 1]")

    def texts(self, tokens: list[Token]) -> dict[str, str]:
        return {
            role: " ".join(tokens[i].surface for i in range(s, e + 1))
            for role, (s, e) in self.spans.items()
        }


@dataclass(frozen=True)
class ParsedSentence:
    """Read-only after construction; safe to share across workers."""

    tokens: list[Token]
    const_tree: ConstituencyTree
    dep_rows: DependencyRows
    verbs: list[int]
    gold_tuples: list[Extraction] = field(default_factory=list)

    def tuple_for(self, verb: int) -> Optional[Extraction]:
        for t in self.gold_tuples:
            if t.indicator_verb == verb:
                return t
        return None

    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]


@dataclass(frozen=True)
class TaggedInstance:
    """One (sentence, indicator verb) pair with its BIO label sequence."""

    sentence: ParsedSentence
    indicator_verb: int
    labels: tuple[str, ...]


# ---------------------------------------------------------------------------
# BIO tag inventory and label encoding
# ---------------------------------------------------------------------------

def tag_inventory(max_arg: int = DEFAULT_MAX_ARG) -> list[str]:
    """Ordered tag set: O, B/I-REL, B/I-ARG0 .. B/I-ARG<max_arg>."""
    tags = ["O", "B-REL", "I-REL"]
    for k in range(max_arg + 1):
        tags.append(f"B-ARG{k}")
        tags.append(f"I-ARG{k}")
    return tags


def check_spans_disjoint(spans: dict[str, tuple[int, int]]):
    taken: dict[int, str] = {}
    for role in sorted(spans):
        s, e = spans[role]
        for i in range(s, e + 1):
            if i in taken:
                raise OverlappingGoldSpans(
                    f"token {i} claimed by both {taken[i]} and {role}")
            taken[i] = role


def spans_to_bio(spans: dict[str, tuple[int, int]], n_tokens: int) -> list[str]:
    """Encode disjoint role spans as a BIO sequence of length ``n_tokens``."""
    check_spans_disjoint(spans)
    labels = ["O"] * n_tokens
    for role, (s, e) in spans.items():
        labels[s] = f"B-{role}"
        for i in range(s + 1, e + 1):
            labels[i] = f"I-{role}"
    return labels


def expand_instances(sentence: ParsedSentence) -> list[TaggedInstance]:
    """One instance per candidate verb; all-O when the verb yields no tuple."""
    n = len(sentence.tokens)
    out = []
    for verb in sentence.verbs:
        gold = sentence.tuple_for(verb)
        if gold is None:
            labels = ["O"] * n
        else:
            labels = spans_to_bio(gold.spans, n)
        out.append(TaggedInstance(sentence, verb, tuple(labels)))
    return out


# ---------------------------------------------------------------------------
# Bracketed-tree reader
# ---------------------------------------------------------------------------

def _tokenize_brackets(text: str) -> list[str]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in "()":
            toks.append(c)
            i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            toks.append(text[i:j])
            i = j
    return toks


def read_bracketed_tree(text: str) -> ConstituencyTree:
    """Parse a PTB-style bracketed string into a ConstituencyTree.

    Preterminal POS nodes are kept as nodes carrying the leaf token index;
    leaf indices are assigned left to right.
    """
    toks = _tokenize_brackets(text)
    if not toks:
        raise EmptyTree("no brackets in input")

    nodes: list[ConstNode] = []
    next_leaf = 0
    pos = 0

    def parse_node() -> int:
        nonlocal pos, next_leaf
        if pos >= len(toks) or toks[pos] != "(":
            raise UnbalancedBrackets(f"expected '(' at token {pos}")
        pos += 1
        if pos >= len(toks) or toks[pos] in "()":
            raise MalformedTree("node without a tag")
        tag = toks[pos]
        pos += 1
        child_ids: list[int] = []
        words: list[str] = []
        while pos < len(toks) and toks[pos] != ")":
            if toks[pos] == "(":
                child_ids.append(parse_node())
            else:
                words.append(toks[pos])
                pos += 1
        if pos >= len(toks):
            raise UnbalancedBrackets("missing ')'")
        pos += 1  # consume ')'
        if words and child_ids:
            raise MalformedTree(f"node {tag} mixes bare words and subtrees")
        if len(words) > 1:
            raise MalformedTree(f"preterminal {tag} covers several words")
        if words:
            nodes.append(ConstNode(tag=tag, leaf=next_leaf))
            next_leaf += 1
        else:
            if not child_ids:
                raise MalformedTree(f"node {tag} has no children")
            nodes.append(ConstNode(tag=tag, children=tuple(child_ids)))
        return len(nodes) - 1

    root = parse_node()
    if pos != len(toks):
        raise UnbalancedBrackets("trailing material after the root bracket")
    return ConstituencyTree(nodes=tuple(nodes), root=root)


def tree_leaf_surfaces(text: str) -> list[str]:
    """Leaf word strings of a bracketed tree, in order (for alignment checks)."""
    toks = _tokenize_brackets(text)
    words = []
    for prev, cur in zip(toks, toks[1:] + ["("]):
        if prev not in "()" and cur == ")":
            words.append(prev)
    return words


# ---------------------------------------------------------------------------
# CoNLL-U reader
# ---------------------------------------------------------------------------

N_CONLLU_COLUMNS = 10
_ID, _FORM, _HEAD, _DEPREL = 0, 1, 6, 7


def read_conllu(rows: Iterable[str]) -> DependencyRows:
    """Read one sentence of CoNLL-U lines into DependencyRows.

    Heads are converted from 1-based (0 = root) to 0-based with ROOT_HEAD.
    Multiword-token ranges ("1-2") and empty nodes ("1.1") are rejected.
    """
    heads: list[int] = []
    deprels: list[str] = []
    expected_id = 1
    for raw in rows:
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != N_CONLLU_COLUMNS:
            raise BadColumnCount(
                f"expected {N_CONLLU_COLUMNS} columns, got {len(cols)}: {line!r}")
        tid = cols[_ID]
        if "-" in tid or "." in tid:
            raise UnsupportedConlluNode(f"unsupported token id {tid!r}")
        if int(tid) != expected_id:
            raise UnsupportedConlluNode(
                f"non-consecutive token id {tid!r} (expected {expected_id})")
        expected_id += 1
        head = int(cols[_HEAD])
        heads.append(ROOT_HEAD if head == 0 else head - 1)
        deprels.append(cols[_DEPREL])
    if not heads:
        raise MissingRoot("empty CoNLL-U sentence")
    return DependencyRows(heads=tuple(heads), deprels=tuple(deprels))


def iter_conllu_sentences(text: str) -> Iterable[list[str]]:
    """Split CoNLL-U text into per-sentence line blocks."""
    block: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            if block:
                yield block
                block = []
        else:
            block.append(line)
    if block:
        yield block


# ---------------------------------------------------------------------------
# JSONL corpus
# ---------------------------------------------------------------------------

def _build_sentence(rec: dict, line: int, max_arg: int) -> ParsedSentence:
    for key in ("tokens", "const_ptb", "dep_conllu", "verbs"):
        if key not in rec:
            raise SchemaViolation(line, f"missing key {key!r}")
    surfaces = rec["tokens"]
    if not isinstance(surfaces, list) or not all(isinstance(s, str) for s in surfaces):
        raise SchemaViolation(line, "tokens must be a list of strings")
    tokens = [Token(i, s) for i, s in enumerate(surfaces)]
    n = len(tokens)

    tree = read_bracketed_tree(rec["const_ptb"])
    if tree.n_leaves != n:
        raise AlignmentError(
            line, f"constituency tree has {tree.n_leaves} leaves for {n} tokens")

    pairs = rec["dep_conllu"]
    if len(pairs) != n:
        raise AlignmentError(line, f"{len(pairs)} dependency rows for {n} tokens")
    try:
        dep = DependencyRows(
            heads=tuple(int(h) for h, _ in pairs),
            deprels=tuple(str(d) for _, d in pairs),
        )
    except CorpusError as exc:
        raise AlignmentError(line, str(exc)) from exc

    verbs = rec["verbs"]
    if len(set(verbs)) != len(verbs):
        raise SchemaViolation(line, "duplicate verb indices")
    for v in verbs:
        if not (isinstance(v, int) and 0 <= v < n):
            raise AlignmentError(line, f"verb index {v} out of range")

    tuples = []
    seen_verbs = set()
    for trec in rec.get("tuples", []):
        if "verb" not in trec or "spans" not in trec:
            raise SchemaViolation(line, "tuple record needs 'verb' and 'spans'")
        verb = trec["verb"]
        if verb not in verbs:
            raise AlignmentError(line, f"tuple verb {verb} not in verb list")
        if verb in seen_verbs:
            raise SchemaViolation(line, f"verb {verb} aligned to several tuples")
        seen_verbs.add(verb)
        spans = {}
        for role, span in trec["spans"].items():
            if role != REL and not (role.startswith("ARG") and role[3:].isdigit()):
                raise SchemaViolation(line, f"unknown role {role!r}")
            if role != REL and int(role[3:]) > max_arg:
                raise SchemaViolation(line, f"role {role!r} beyond ARG{max_arg}")
            s, e = int(span[0]), int(span[1])
            if not (0 <= s <= e < n):
                raise AlignmentError(line, f"{role} span [{s},{e}] out of bounds")
            spans[role] = (s, e)
        if REL not in spans:
            raise SchemaViolation(line, "tuple lacks REL span")
        rs, re_ = spans[REL]
        if not rs <= verb <= re_:
            raise AlignmentError(line, f"REL span [{rs},{re_}] misses verb {verb}")
        check_spans_disjoint(spans)
        tuples.append(Extraction(spans=spans, indicator_verb=verb))

    return ParsedSentence(tokens=tokens, const_tree=tree, dep_rows=dep,
                          verbs=list(verbs), gold_tuples=tuples)


def load_corpus(path: str | Path, max_arg: int = DEFAULT_MAX_ARG) -> list[ParsedSentence]:
    """Load a JSONL corpus; every error carries the offending line number."""
    sentences = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(lineno, f"bad JSON: {exc}") from exc
            sentences.append(_build_sentence(rec, lineno, max_arg))
    return sentences


def sentence_to_record(s: ParsedSentence, const_ptb: Optional[str] = None) -> dict:
    """Serialize back to the JSONL schema (inverse of loading)."""
    return {
        "tokens": s.surfaces(),
        "const_ptb": const_ptb if const_ptb is not None else write_bracketed_tree(s),
        "dep_conllu": [[h, d] for h, d in zip(s.dep_rows.heads, s.dep_rows.deprels)],
        "verbs": list(s.verbs),
        "tuples": [
            {"verb": t.indicator_verb,
             "spans": {r: list(sp) for r, sp in sorted(t.spans.items())}}
            for t in s.gold_tuples
        ],
    }


def write_bracketed_tree(s: ParsedSentence) -> str:
    tree = s.const_tree

    def emit(nid: int) -> str:
        node = tree.nodes[nid]
        if node.is_preterminal:
            return f"({node.tag} {s.tokens[node.leaf].surface})"
        inner = " ".join(emit(c) for c in node.children)
        return f"({node.tag} {inner})"

    return emit(tree.root)


def save_corpus(sentences: list[ParsedSentence], path: str | Path):
    with open(path, "w", encoding="utf-8") as f:
        for s in sentences:
            f.write(json.dumps(sentence_to_record(s)) + "\n")


def load_split_files(ptb_path: str | Path, conllu_path: str | Path,
                     verbs_path: str | Path) -> list[ParsedSentence]:
    """Load a corpus given as parallel .ptb / .conllu / .verbs files.

    Sentences are zipped by order; tokens come from the tree leaves.  No gold
    tuples are available in this form.
    """
    with open(ptb_path, encoding="utf-8") as f:
        ptb_lines = [l.strip() for l in f if l.strip()]
    conllu_blocks = list(iter_conllu_sentences(Path(conllu_path).read_text(encoding="utf-8")))
    verb_lines = Path(verbs_path).read_text(encoding="utf-8").splitlines()
    if not (len(ptb_lines) == len(conllu_blocks) == len(verb_lines)):
        raise AlignmentError(0, (
            f"{len(ptb_lines)} trees vs {len(conllu_blocks)} dependency blocks "
            f"vs {len(verb_lines)} verb lines"))

    sentences = []
    for i, (ptb, block, vline) in enumerate(zip(ptb_lines, conllu_blocks, verb_lines)):
        dep = read_conllu(block)
        rec = {
            "tokens": tree_leaf_surfaces(ptb),
            "const_ptb": ptb,
            "dep_conllu": [[h, d] for h, d in zip(dep.heads, dep.deprels)],
            "verbs": [int(v) for v in vline.split()],
        }
        sentences.append(_build_sentence(rec, i, DEFAULT_MAX_ARG))
    return sentences
