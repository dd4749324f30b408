"""Syntactic graph encoders: label embeddings, one-layer GCN, aggregation.

One GCN per view.  A node's message vector is its contextual state
concatenated with its label embedding; attention over neighbours (self-loop
included) is the masked softmax of raw message dot products, and the layer
output is the ReLU of the attention-weighted neighbour sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graphs import SyntacticGraph, CONST_VIEW, DEP_VIEW

UNK_LABEL = "<unk>"


class EmptyPath(Exception):
    pass


class LabelVocab:
    """Label-id map with an UNK fallback row for unseen labels."""

    def __init__(self, labels: list[str]):
        if UNK_LABEL not in labels:
            labels = [UNK_LABEL] + list(labels)
        self.labels = list(labels)
        self.ids = {l: i for i, l in enumerate(self.labels)}
        self.unk_id = self.ids[UNK_LABEL]

    def __len__(self):
        return len(self.labels)

    def lookup(self, label: str) -> int:
        return self.ids.get(label, self.unk_id)

    @classmethod
    def collect(cls, labels) -> "LabelVocab":
        return cls([UNK_LABEL] + sorted(set(labels)))


@dataclass
class GcnParams:
    """Per-view tensors: label table W1, projection W2 and bias."""

    w1: Tensor  # (N_labels, d_l)
    w2: Tensor  # (d_h, d_l)
    b: Tensor   # (d_h,)

    @classmethod
    def init(cls, n_labels: int, d_h: int, d_l: int,
             rng: np.random.Generator) -> "GcnParams":
        u = lambda *shape: rng.uniform(-0.1, 0.1, size=shape)
        return cls(w1=ad.parameter(u(n_labels, d_l)),
                   w2=ad.parameter(u(d_h, d_l)),
                   b=ad.parameter(np.zeros(d_h)))

    def named(self, view: str) -> list[tuple[str, Tensor]]:
        return [(f"gcn.{view}.w1", self.w1), (f"gcn.{view}.w2", self.w2),
                (f"gcn.{view}.b", self.b)]


def node_label_embed_dep(g: SyntacticGraph, params: GcnParams,
                         labels: LabelVocab) -> list[Tensor]:
    assert g.view == DEP_VIEW
    return [ad.embedding_lookup(params.w1, labels.lookup(l))
            for l in g.node_labels]


def node_label_embed_const(g: SyntacticGraph, params: GcnParams,
                           labels: LabelVocab) -> list[Tensor]:
    """Mean of the tag embeddings along each node's constituency path."""
    assert g.view == CONST_VIEW
    out = []
    for i, path in enumerate(g.node_labels):
        if not path:
            raise EmptyPath(f"node {i} has an empty constituency path")
        rows = [ad.embedding_lookup(params.w1, labels.lookup(t)) for t in path]
        out.append(ad.mean_over_list(rows))
    return out


def gcn_layer(g: SyntacticGraph, h_ctx: list[Tensor], l: list[Tensor],
              params: GcnParams) -> tuple[list[Tensor], list[Tensor]]:
    """One graph convolution; returns per-node states and attention rows.

    Attention row i is a masked softmax over the adjacency row (self-loop
    included), so isolated nodes cannot occur.
    """
    n = g.n
    msgs = [ad.concat([h_ctx[j], l[j]]) for j in range(n)]
    contrib = [ad.add(ad.add(h_ctx[j], ad.matmul(params.w2, l[j])), params.b)
               for j in range(n)]
    out, alphas = [], []
    for i in range(n):
        mask = [bool(g.adjacency[i, j]) for j in range(n)]
        logits = [ad.dot(msgs[i], msgs[j]) if mask[j] else None
                  for j in range(n)]
        alpha = ad.softmax_over_masked_set(logits, mask)
        out.append(ad.relu(ad.weighted_sum(contrib, alpha)))
        alphas.append(alpha)
    return out, alphas


def label_projection(l: list[Tensor], params: GcnParams) -> list[Tensor]:
    """GCN-ablated view state: projected label embedding, no message passing."""
    return [ad.add(ad.matmul(params.w2, lj), params.b) for lj in l]


def aggregate(h_ctx: list[Tensor], h_con: list[Tensor] | None = None,
              h_dep: list[Tensor] | None = None) -> list[Tensor]:
    """Per-token concatenation in the fixed order ctx, con, dep."""
    views = [v for v in (h_ctx, h_con, h_dep) if v is not None]
    for v in views[1:]:
        if len(v) != len(h_ctx):
            raise ad.ShapeMismatch("view length mismatch in aggregate")
    return [ad.concat([v[i] for v in views]) for i in range(len(h_ctx))]
