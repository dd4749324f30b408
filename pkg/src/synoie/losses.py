"""Tagging loss, the three multi-view relationship losses, and their sum.

All pairwise probabilities are softmaxes of raw dot products over one
sentence's node set (the candidate set is the view supplying the target
vector).  Each loss is a sum of negative log-probabilities, so every loss is
non-negative; batch-level normalization is the trainer's concern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class EmptyCandidates(Exception):
    pass


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.024
    beta: float = 0.012
    gamma: float = 0.012

    def __post_init__(self):
        for name, w in (("alpha", self.alpha), ("beta", self.beta),
                        ("gamma", self.gamma)):
            if not (np.isfinite(w) and w >= 0):
                raise ValueError(f"{name} must be a non-negative finite real")


def pairwise_softmax_prob(target_index: int, anchor: Tensor,
                          candidates: list[Tensor]) -> Tensor:
    """P(candidate[target] | anchor): softmax of candidate-anchor dots."""
    if not candidates:
        raise EmptyCandidates("no candidate vectors")
    if not 0 <= target_index < len(candidates):
        raise EmptyCandidates(f"target {target_index} outside candidate set")
    logits = [ad.dot(c, anchor) for c in candidates]
    probs = ad.softmax_over_masked_set(logits, [True] * len(candidates))
    pick = np.zeros(len(candidates))
    pick[target_index] = 1.0
    return ad.dot(probs, ad.constant(pick))


def _log_prob_row(anchor: Tensor, candidates: list[Tensor]) -> Tensor:
    return ad.log_softmax_vector(ad.dots_with(anchor, candidates))


def _selection_row(adj: np.ndarray, i: int, exclude_self: bool) -> np.ndarray:
    row = adj[i].astype(float)
    if exclude_self:
        row[i] = 0.0
    return row


def loss_r1(h_by_view: dict[str, list[Tensor]],
            adj_by_view: dict[str, np.ndarray],
            exclude_self_loops: bool = True) -> Tensor:
    """Inter-node intra-view: connected nodes score high under their own view."""
    terms = []
    for view, h in h_by_view.items():
        adj = adj_by_view[view]
        for i in range(len(h)):
            sel = _selection_row(adj, i, exclude_self_loops)
            if not sel.any():
                continue
            log_probs = _log_prob_row(h[i], h)
            terms.append(ad.dot(log_probs, ad.constant(sel)))
    if not terms:
        return ad.constant(0.0)
    return ad.scalar_mul(-1.0, ad.sum_list(terms))


def loss_r2(h_con: list[Tensor], h_dep: list[Tensor]) -> Tensor:
    """Intra-node inter-view: each node close to its own other-view state."""
    n = len(h_con)
    if n != len(h_dep):
        raise ad.ShapeMismatch("views disagree on node count")
    terms = []
    for h_z, h_other in ((h_dep, h_con), (h_con, h_dep)):
        for i in range(n):
            pick = np.zeros(n)
            pick[i] = 1.0
            log_probs = _log_prob_row(h_z[i], h_other)
            terms.append(ad.dot(log_probs, ad.constant(pick)))
    return ad.scalar_mul(-1.0, ad.sum_list(terms))


def loss_r3(h_con: list[Tensor], h_dep: list[Tensor],
            adj_con: np.ndarray, adj_dep: np.ndarray,
            exclude_self_loops: bool = True) -> Tensor:
    """Inter-node inter-view: view-z edges pull in other-view neighbours."""
    n = len(h_con)
    terms = []
    for h_z, h_other, adj in ((h_dep, h_con, adj_dep), (h_con, h_dep, adj_con)):
        for j in range(n):
            sel = _selection_row(adj, j, exclude_self_loops)
            if not sel.any():
                continue
            log_probs = _log_prob_row(h_z[j], h_other)
            terms.append(ad.dot(log_probs, ad.constant(sel)))
    if not terms:
        return ad.constant(0.0)
    return ad.scalar_mul(-1.0, ad.sum_list(terms))


def tagging_loss(logits: list[Tensor], gold_ids: list[int]) -> Tensor:
    """Mean token-level cross entropy for one instance."""
    if len(logits) != len(gold_ids):
        raise ad.ShapeMismatch("logit/label length mismatch")
    return ad.mean_over_list([ad.cross_entropy_with_logits(lg, y)
                              for lg, y in zip(logits, gold_ids)])


def combined_loss(l_ce: Tensor, l_r1: Tensor | None, l_r2: Tensor | None,
                  l_r3: Tensor | None, weights: LossWeights) -> Tensor:
    """L_CE + alpha*L_R1 + beta*L_R2 + gamma*L_R3; zero weights drop out."""
    total = l_ce
    for w, term in ((weights.alpha, l_r1), (weights.beta, l_r2),
                    (weights.gamma, l_r3)):
        if w != 0.0 and term is not None:
            total = ad.add(total, ad.scalar_mul(w, term))
    return total
