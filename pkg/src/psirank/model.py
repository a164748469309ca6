"""Steady-state influence solver.

For a label (origin user) i, the stationary Newsfeed probabilities p_i solve the
fixed point p_i = A p_i + b_i, where A is the sparse propagation matrix: entry
a[j,k] = mu_k / sum_{l in leaders(j)} (lam_l + mu_l) whenever k is a leader of j.
Wall probabilities follow directly as q_i = C p_i + d_i with C = diag(mu/(lam+mu))
and d_i carrying the single self-post entry lam_i/(lam_i+mu_i) at row i.

Two solution routes are provided: a dense LU closed form (the factorization of
I - A is label-independent and reused across labels) and a sparse fixed-point
iteration whose convergence rate is the spectral radius of A, bounded by the row
sums. A birth-death cross-check recomputes each solved entry from the raw graph
and rates, independently of the assembled matrix. Results depend on neither the
Newsfeed size M nor the Wall size K; no operation here takes them as input.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .graph import SocialGraph

__all__ = [
    "ActivityRates",
    "PropagationSystem",
    "InfluenceVectors",
    "NonConvergenceError",
    "SingularSystemError",
    "build_system",
    "spectral_bounds",
    "solve_iterative",
    "solve_dense",
    "DenseFactorization",
    "solve_all_labels",
    "iter_label_solutions",
    "birth_death_check",
    "pagerank",
    "load_rates",
    "save_rates",
]

DENSE_CAP_DEFAULT = 2000
MAX_ITER_CAP = 100_000


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach tolerance; carries the last residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ActivityRates:
    """Per-user self-post rate lam and re-post rate mu, in posts per unit time."""

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lam = np.ascontiguousarray(np.asarray(self.lam, dtype=np.float64))
        mu = np.ascontiguousarray(np.asarray(self.mu, dtype=np.float64))
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        if lam.shape != mu.shape or lam.ndim != 1:
            raise ValueError("lam and mu must be 1-D arrays of equal length")
        if not (np.isfinite(lam).all() and np.isfinite(mu).all()):
            raise ValueError("rates must be finite")
        if (lam < 0).any() or (mu < 0).any():
            raise ValueError("rates must be non-negative")

    @property
    def n_users(self) -> int:
        return self.lam.size

    @property
    def total(self) -> np.ndarray:
        return self.lam + self.mu

    def inactive_users(self) -> np.ndarray:
        """Users with lam + mu == 0 (no activity at all)."""
        return np.flatnonzero(self.total == 0.0)


@dataclass
class InfluenceVectors:
    """Solved Newsfeed (p) and Wall (q) probabilities for one label."""

    label: int
    p: np.ndarray
    q: np.ndarray
    iterations: int | None = None
    residual: float | None = None
    step_norms: list[float] | None = None


@dataclass
class PropagationSystem:
    """The assembled linear system shared by all labels on one (graph, rates) pair."""

    graph: SocialGraph
    rates: ActivityRates
    A: sp.csr_matrix
    row_sums: np.ndarray       # r(j), zero for users without leaders
    c_diag: np.ndarray         # mu_j / (lam_j + mu_j), zero for inactive users
    inflow: np.ndarray         # sum over leaders of (lam + mu), zero when no leaders
    self_share: np.ndarray     # lam_i / (lam_i + mu_i): the single d_i entry
    _b_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_users(self) -> int:
        return self.graph.n_users

    def leaderless_users(self) -> np.ndarray:
        """Users with an empty Newsfeed equation; their p is defined as 0."""
        return np.flatnonzero(np.diff(self.graph.leader_indptr) == 0)

    def b_column(self, label: int) -> np.ndarray:
        """Dense b_i: lam_i / inflow(j) at every row j that follows label i."""
        b = np.zeros(self.n_users)
        rows = self.graph.followers(label)
        if rows.size:
            b[rows] = self.rates.lam[label] / self.inflow[rows]
        return b

    def b_matrix(self, labels: np.ndarray) -> np.ndarray:
        """Dense N x len(labels) matrix of b columns (for blocked solves)."""
        out = np.zeros((self.n_users, len(labels)))
        for k, lab in enumerate(labels):
            rows = self.graph.followers(int(lab))
            if rows.size:
                out[rows, k] = self.rates.lam[lab] / self.inflow[rows]
        return out

    def d_value(self, label: int) -> float:
        return float(self.self_share[label])


def build_system(graph: SocialGraph, rates: ActivityRates, allow_inactive: bool = False) -> PropagationSystem:
    """Assemble the propagation matrix and per-label vector factories.

    Rows belonging to users without leaders are all-zero. Leaders with mu == 0
    contribute no entry (users that never re-post do not propagate). By default a
    user with lam + mu == 0 is an error; pass allow_inactive=True to accept such
    users (their Wall share is defined as 0 and they are reported by
    rates.inactive_users()), which trace-estimated rates routinely need.
    """
    n = graph.n_users
    if rates.n_users != n:
        raise ValueError(f"rates cover {rates.n_users} users, graph has {n}")
    inactive = rates.inactive_users()
    if inactive.size and not allow_inactive:
        raise ValueError(
            f"{inactive.size} user(s) have lam + mu == 0 (first: {int(inactive[0])}); "
            "pass allow_inactive=True to accept them"
        )
    total = rates.total
    indptr = graph.leader_indptr.astype(np.int64)
    indices = graph.leader_indices.astype(np.int64)
    counts = np.diff(indptr)
    seg = np.repeat(np.arange(n), counts)
    inflow = np.zeros(n)
    np.add.at(inflow, seg, total[indices])
    data = np.zeros(indices.size)
    has = inflow[seg] > 0
    data[has] = rates.mu[indices[has]] / inflow[seg[has]]
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    A.eliminate_zeros()
    row_sums = np.asarray(A.sum(axis=1)).ravel()
    with np.errstate(invalid="ignore", divide="ignore"):
        c_diag = np.where(total > 0, rates.mu / np.where(total > 0, total, 1.0), 0.0)
        self_share = np.where(total > 0, rates.lam / np.where(total > 0, total, 1.0), 0.0)
    return PropagationSystem(graph, rates, A, row_sums, c_diag, inflow, self_share)


def spectral_bounds(system: PropagationSystem) -> tuple[float, float]:
    """(min, max) row sum over rows with at least one leader; brackets the spectral radius."""
    mask = np.diff(system.graph.leader_indptr) > 0
    if not mask.any():
        return (0.0, 0.0)
    r = system.row_sums[mask]
    return (float(r.min()), float(r.max()))


def _default_max_iter(tol: float, max_r: float) -> int:
    if max_r <= 0.0:
        return 2
    if max_r >= 1.0:
        return MAX_ITER_CAP
    est = 10 * int(np.ceil(np.log(tol) / np.log(max_r)))
    return max(2, min(est, MAX_ITER_CAP))


def _check_contractive(system: PropagationSystem) -> float:
    lo, hi = spectral_bounds(system)
    if hi >= 1.0:
        warnings.warn(
            "max propagation row sum is 1: the spectral radius may equal 1 and the "
            "fixed-point iteration is not certified to converge",
            RuntimeWarning,
            stacklevel=3,
        )
    return hi


def _iterate_block(A, B, tol, max_iter, record_history=False):
    """Run p <- A p + b on all columns of B until each column's step norm <= tol.

    A column is frozen the first time its infinity-norm step falls at or below tol,
    so every column's trajectory is identical whatever block it is solved in (this
    is what makes worker/block splits bit-reproducible).
    """
    n, k = B.shape
    P = np.zeros((n, k))
    iters = np.zeros(k, dtype=np.int64)
    resid = np.zeros(k)
    active = np.arange(k)
    history = [] if record_history else None
    t = 0
    while active.size:
        t += 1
        if t > max_iter:
            worst = float(resid[active].max()) if active.size else float("nan")
            raise NonConvergenceError(
                f"{active.size} label(s) not converged after {max_iter} iterations "
                f"(last step norm {worst:.3e})",
                residual=worst,
                iterations=max_iter,
            )
        new = A @ P[:, active] + B[:, active]
        delta = np.abs(new - P[:, active]).max(axis=0) if n else np.zeros(active.size)
        P[:, active] = new
        resid[active] = delta
        if record_history:
            history.append(float(delta.max()))
        done = delta <= tol
        iters[active[done]] = t
        active = active[~done]
    return P, iters, resid, history


def solve_iterative(
    system: PropagationSystem,
    label: int,
    tol: float = 1e-10,
    max_iter: int | None = None,
    record_history: bool = False,
) -> InfluenceVectors:
    """Solve one label by sparse fixed-point iteration from p(0) = 0.

    Terminates when the infinity norm of the step falls to tol. Raises
    NonConvergenceError (carrying the last residual) if max_iter is exhausted;
    warns first if the row-sum bound does not certify contraction.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    max_r = _check_contractive(system)
    if max_iter is None:
        max_iter = _default_max_iter(tol, max_r)
    B = system.b_matrix(np.asarray([label]))
    P, iters, resid, history = _iterate_block(system.A, B, tol, max_iter, record_history)
    p = P[:, 0]
    q = system.c_diag * p
    q[label] += system.d_value(label)
    return InfluenceVectors(
        label=int(label),
        p=p,
        q=q,
        iterations=int(iters[0]),
        residual=float(resid[0]),
        step_norms=history,
    )


class DenseFactorization:
    """LU factorization of I - A, reusable across labels (it does not depend on the label)."""

    def __init__(self, system: PropagationSystem, cap: int = DENSE_CAP_DEFAULT):
        n = system.n_users
        if n > cap:
            raise ValueError(
                f"dense path refused for N={n} > cap={cap}; use solve_iterative"
            )
        self.system = system
        M = np.eye(n) - system.A.toarray()
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
        diag = np.abs(np.diag(lu))
        if n and (diag < n * np.finfo(float).eps * max(1.0, diag.max())).any():
            raise SingularSystemError(
                "I - A is singular: the propagation matrix has spectral radius >= 1 "
                "(no user on some cycle injects self-posts), so the fixed point is not unique"
            )
        self._lu = (lu, piv)

    def solve(self, label: int) -> InfluenceVectors:
        system = self.system
        b = system.b_column(label)
        p = scipy.linalg.lu_solve(self._lu, b, check_finite=False)
        q = system.c_diag * p
        q[label] += system.d_value(label)
        return InfluenceVectors(label=int(label), p=p, q=q)


def solve_dense(
    system: PropagationSystem,
    label: int,
    factorization: DenseFactorization | None = None,
    cap: int = DENSE_CAP_DEFAULT,
) -> InfluenceVectors:
    """Closed-form solve p = (I - A)^(-1) b via LU; exact up to factorization error."""
    if factorization is None:
        factorization = DenseFactorization(system, cap=cap)
    return factorization.solve(label)


def _solve_block_worker(args):
    A, B, labels, tol, max_iter = args
    P, iters, resid, _ = _iterate_block(A, B, tol, max_iter)
    return labels, P, iters, resid


def iter_label_solutions(
    system: PropagationSystem,
    labels=None,
    tol: float = 1e-10,
    max_iter: int | None = None,
    block_size: int = 256,
    workers: int = 1,
):
    """Yield InfluenceVectors per label, solving labels in blocks.

    Blocks iterate all their columns together but freeze each column independently
    at its own convergence point, so the per-label results are identical for any
    block size or worker count. Yields in the order labels were given.
    """
    if labels is None:
        labels = np.arange(system.n_users)
    labels = np.asarray(labels, dtype=np.int64)
    max_r = _check_contractive(system)
    if max_iter is None:
        max_iter = _default_max_iter(tol, max_r)
    blocks = [labels[k:k + block_size] for k in range(0, labels.size, block_size)]

    def finish(block_labels, P, iters, resid):
        for k, lab in enumerate(block_labels):
            p = P[:, k].copy()
            q = system.c_diag * p
            q[lab] += system.d_value(int(lab))
            yield InfluenceVectors(int(lab), p, q, int(iters[k]), float(resid[k]))

    if workers <= 1:
        for blk in blocks:
            P, iters, resid, _ = _iterate_block(system.A, system.b_matrix(blk), tol, max_iter)
            yield from finish(blk, P, iters, resid)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        tasks = [(system.A, system.b_matrix(blk), blk, tol, max_iter) for blk in blocks]
        for block_labels, P, iters, resid in pool.map(_solve_block_worker, tasks):
            yield from finish(block_labels, P, iters, resid)


def solve_all_labels(
    system: PropagationSystem,
    labels=None,
    tol: float = 1e-10,
    max_iter: int | None = None,
    block_size: int = 256,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Solve every label (or a subset) and return dense (P, Q) indexed [label, user].

    Rows of the returned matrices follow the order of `labels`. The info dict
    reports iteration counts and final residuals per label.
    """
    if labels is None:
        labels = np.arange(system.n_users)
    labels = np.asarray(labels, dtype=np.int64)
    n = system.n_users
    P = np.zeros((labels.size, n))
    Q = np.zeros((labels.size, n))
    iters = np.zeros(labels.size, dtype=np.int64)
    resid = np.zeros(labels.size)
    for k, vec in enumerate(
        iter_label_solutions(system, labels, tol, max_iter, block_size, workers)
    ):
        P[k] = vec.p
        Q[k] = vec.q
        iters[k] = vec.iterations
        resid[k] = vec.residual
    info = {
        "labels": labels,
        "iterations": iters,
        "residuals": resid,
        "tol": tol,
        "spectral_bounds": spectral_bounds(system),
    }
    return P, Q, info


def birth_death_check(system: PropagationSystem, label: int, vectors: InfluenceVectors) -> np.ndarray:
    """Residual of each solved Newsfeed entry against its birth-death closed form.

    For every user j with leaders, the stationary mean of j's two-state birth-death
    chain gives p[j] = inflow_of_label / total_inflow, recomputed here directly from
    the raw adjacency and rates (not from the assembled matrix). Returns per-user
    absolute residuals, 0 for users without leaders.
    """
    graph, rates = system.graph, system.rates
    lam, mu = rates.lam, rates.mu
    p = vectors.p
    out = np.zeros(graph.n_users)
    for j in range(graph.n_users):
        lead = graph.leaders(j)
        if lead.size == 0:
            continue
        has_label = bool(np.isin(label, lead))
        num = (lam[label] if has_label else 0.0) + float(np.sum(mu[lead] * p[lead]))
        den = float(np.sum(lam[lead[lead != label]])) + float(np.sum(mu[lead] * (1.0 - p[lead])))
        out[j] = abs(p[j] - num / (num + den))
    return out


def pagerank(graph: SocialGraph, beta: float, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Power-iteration PageRank on the leader-pointing graph.

    The column-stochastic weight matrix spreads each user's mass uniformly over
    their leaders; users with no leaders (dangling columns) redistribute uniformly.
    Iterates pi <- beta W pi + (1-beta) e/N to an l1 step below tol; the result sums
    to 1.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie in (0, 1)")
    n = graph.n_users
    outdeg = graph.leader_counts().astype(np.float64)
    dangling = outdeg == 0.0
    inv = np.zeros(n)
    inv[~dangling] = 1.0 / outdeg[~dangling]
    # W[k, j] = 1/outdeg(j) for each leader k of j; row k holds k's followers
    W = sp.csr_matrix(
        (inv[graph.follower_indices], graph.follower_indices, graph.follower_indptr),
        shape=(n, n),
    )
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = beta * (W @ pi + pi[dangling].sum() / n) + (1.0 - beta) / n
        if np.abs(new - pi).sum() <= tol:
            return new
        pi = new
    raise NonConvergenceError(
        f"pagerank did not converge within {max_iter} iterations",
        residual=float(np.abs(new - pi).sum()),
        iterations=max_iter,
    )


# -- rates files --------------------------------------------------------------

def save_rates(rates: ActivityRates, path, id_map=None) -> None:
    """Write `user<TAB>lambda<TAB>mu` lines."""
    with open(path, "w") as fh:
        for u in range(rates.n_users):
            uid = id_map[u] if id_map is not None else u
            fh.write(f"{uid}\t{rates.lam[u]!r}\t{rates.mu[u]!r}\n")


def load_rates(path, n_users: int | None = None, id_map_path=None) -> ActivityRates:
    """Read a `user<TAB>lambda<TAB>mu` file; `#` comments ignored."""
    to_internal = None
    if id_map_path is not None:
        from .graph import load_id_map

        ext = load_id_map(id_map_path)
        to_internal = {e: k for k, e in enumerate(ext)}
        if n_users is None:
            n_users = len(ext)
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            u, lam, mu = line.split("\t")
            uid = to_internal[u] if to_internal is not None else int(u)
            rows.append((uid, float(lam), float(mu)))
    if n_users is None:
        n_users = max(u for u, _, _ in rows) + 1 if rows else 0
    lam = np.zeros(n_users)
    mu = np.zeros(n_users)
    for u, l, m in rows:
        lam[u] = l
        mu[u] = m
    return ActivityRates(lam, mu)
