"""Influence scores, rankings, and ranking-comparison statistics.

The headline score of a user i averages the probability that a Wall post has
origin i over all other users' Walls (psi); the self-inclusive variant (psi_tilde)
averages over every Wall, sums to 1 over a complete solve, and reduces to PageRank
under homogeneous activity. All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ScoreTable",
    "psi_scores",
    "rank",
    "common_users_proportion",
    "rank_scatter",
    "pearson",
]


@dataclass
class ScoreTable:
    """Per-label influence scores with the deterministic psi ranking.

    `labels` lists the scored users (all N for a complete solve); `order` is those
    labels sorted by descending psi, ties broken by ascending id. `normalized` is
    False when only a subset of labels was scored, in which case sum invariants do
    not apply.
    """

    labels: np.ndarray
    psi: np.ndarray
    psi_tilde: np.ndarray
    self_wall: np.ndarray  # q_i^(i) per scored label
    order: np.ndarray
    normalized: bool

    def rank_positions(self) -> dict[int, int]:
        """1-based rank per label id, following `order`."""
        return {int(u): k + 1 for k, u in enumerate(self.order)}


def _as_label_matrix(all_q, n_users: int):
    """Accept either a [label, user] matrix or a {label: q vector} mapping."""
    if isinstance(all_q, np.ndarray):
        if all_q.ndim != 2 or all_q.shape[1] != n_users:
            raise ValueError("q matrix must be 2-D with one column per user")
        if all_q.shape[0] != n_users:
            raise ValueError("matrix form requires one row per label; pass a dict for subsets")
        return np.arange(n_users), all_q
    labels = np.asarray(sorted(all_q.keys()), dtype=np.int64)
    Q = np.vstack([np.asarray(all_q[int(k)], dtype=np.float64) for k in labels])
    if Q.shape[1] != n_users:
        raise ValueError("q vectors must have one entry per user")
    return labels, Q


def psi_scores(all_q, n_users: int) -> ScoreTable:
    """Turn per-label Wall vectors into influence scores.

    psi_i averages q_i over the N-1 other users; psi_tilde_i averages over all N
    (including the label's own Wall). Accepts the full [label, user] matrix or a
    {label: q} dict; a strict subset of labels yields a table marked non-normalized.
    """
    labels, Q = _as_label_matrix(all_q, n_users)
    if not np.isfinite(Q).all():
        raise ValueError("q vectors contain non-finite values")
    totals = Q.sum(axis=1)
    self_wall = Q[np.arange(labels.size), labels]
    psi = (totals - self_wall) / (n_users - 1) if n_users > 1 else np.zeros(labels.size)
    psi_tilde = totals / n_users
    return ScoreTable(
        labels=labels,
        psi=psi,
        psi_tilde=psi_tilde,
        self_wall=self_wall,
        order=rank(psi, ids=labels),
        normalized=labels.size == n_users,
    )


def rank(scores, ids=None) -> np.ndarray:
    """Ids ordered by descending score; ties broken by ascending id."""
    scores = np.asarray(scores, dtype=np.float64)
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    if ids is None:
        ids = np.arange(scores.size)
    ids = np.asarray(ids, dtype=np.int64)
    order = np.lexsort((ids, -scores))
    return ids[order]


def common_users_proportion(list_a, list_b, depths) -> dict[int, float]:
    """Overlap fraction of the two rankings' top-X sets, per requested depth X."""
    a = np.asarray(list_a, dtype=np.int64)
    b = np.asarray(list_b, dtype=np.int64)
    if set(a.tolist()) != set(b.tolist()) or a.size != b.size:
        raise ValueError("rankings must cover the same user set")
    out = {}
    for depth in depths:
        x = int(depth)
        if not (1 <= x <= a.size):
            raise ValueError(f"depth {x} outside [1, {a.size}]")
        out[x] = len(set(a[:x].tolist()) & set(b[:x].tolist())) / x
    return out


def rank_scatter(list_a, list_b) -> np.ndarray:
    """(user, rank_in_a, rank_in_b) triples, ranks 1-based, one row per user."""
    a = np.asarray(list_a, dtype=np.int64)
    b = np.asarray(list_b, dtype=np.int64)
    if set(a.tolist()) != set(b.tolist()) or a.size != b.size:
        raise ValueError("rankings must cover the same user set")
    pos_b = {int(u): k + 1 for k, u in enumerate(b)}
    rows = [(int(u), k + 1, pos_b[int(u)]) for k, u in enumerate(a)]
    return np.asarray(rows, dtype=np.int64)


def pearson(x, y) -> float:
    """Pearson correlation coefficient of two equal-length sequences."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two equal-length 1-D sequences of size >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if denom == 0.0:
        raise ValueError("zero variance input")
    return float((dx * dy).sum() / denom)
