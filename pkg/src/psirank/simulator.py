"""Event-driven simulation of the full posting platform.

Unlike the solver, this executes the platform mechanics over time: every user owns
a Wall of capacity K and a Newsfeed of capacity M (unbounded under TTL eviction),
self-posts and re-posts fire from per-user timers merged in one priority queue, and
each fresh Wall item is copied instantly into all followers' Newsfeeds. Empirical
p/q come out as time-averaged fractional occupancy per (origin, list) pair over the
post-warm-up horizon, which is what the balance-equation solution predicts.

One seeded generator drives every stochastic choice in event order, so runs are
bit-reproducible. Per-Newsfeed arrival/departure counters are kept so the exact
conservation identity X(0) + in = out + X(end) can be audited pair by pair.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .emulator import TraceEvent
from .graph import SocialGraph
from .model import ActivityRates

__all__ = [
    "Post",
    "PolicyConfig",
    "PlatformState",
    "SimulationResult",
    "simulate",
    "check_conservation",
    "conservation_violations",
]

_POST, _REPOST, _EXPIRE = 0, 1, 2

SELECTIONS = ("random", "newest", "most_popular", "least_popular")
EVICTIONS = ("random", "fifo_oldest", "ttl")
ARRIVALS = ("poisson", "hyperexponential", "deterministic")


class Post:
    """A posted item; the origin label never changes over the post's lifetime."""

    __slots__ = ("post_id", "origin", "created_at", "root_id")

    def __init__(self, post_id: int, origin: int, created_at: float, root_id: int):
        self.post_id = post_id
        self.origin = origin
        self.created_at = created_at
        self.root_id = root_id

    def __repr__(self):  # pragma: no cover
        return f"Post(id={self.post_id}, origin={self.origin}, root={self.root_id})"


@dataclass(frozen=True)
class PolicyConfig:
    """Selection, eviction and arrival-process configuration.

    ttl is the fixed Newsfeed residence time (required > 0 with ttl eviction; Walls
    then evict FIFO so they stay bounded by K). cv2 is the squared coefficient of
    variation of the two-phase balanced hyperexponential inter-arrival time.
    """

    selection: str = "random"
    eviction: str = "random"
    arrivals: str = "poisson"
    ttl: float | None = None
    cv2: float = 4.0

    def __post_init__(self):
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}")
        if self.eviction not in EVICTIONS:
            raise ValueError(f"eviction must be one of {EVICTIONS}")
        if self.arrivals not in ARRIVALS:
            raise ValueError(f"arrivals must be one of {ARRIVALS}")
        if self.eviction == "ttl":
            if self.ttl is None or not self.ttl > 0:
                raise ValueError("ttl eviction requires ttl > 0")
        if self.arrivals == "hyperexponential" and not self.cv2 > 1:
            raise ValueError("hyperexponential arrivals require cv2 > 1")


class _ListState:
    """One Wall or Newsfeed: entries plus occupancy and conservation bookkeeping."""

    __slots__ = ("entries", "counts", "occ", "last_t", "len_integral", "in_counts", "out_counts")

    def __init__(self):
        self.entries: list[Post] = []
        self.counts: dict[int, int] = {}
        self.occ: dict[int, float] = {}
        self.last_t = 0.0
        self.len_integral = 0.0
        self.in_counts: dict[int, int] = {}
        self.out_counts: dict[int, int] = {}

    def integrate(self, now: float, t_meas: float) -> None:
        # accumulate occupancy*dt over the measured part of [last_t, now]
        last = self.last_t
        if now > t_meas and now > last:
            lo = last if last > t_meas else t_meas
            dt = now - lo
            occ = self.occ
            total = 0
            for o, c in self.counts.items():
                if c:
                    occ[o] = occ.get(o, 0.0) + c * dt
                    total += c
            if total:
                self.len_integral += total * dt
        self.last_t = now


@dataclass
class PlatformState:
    """Full platform state at end of run, including the audit counters."""

    walls: list[_ListState]
    feeds: list[_ListState]
    clock: float
    repost_counts: dict[int, int]
    skipped_reposts: int
    conservation_tracked: bool


@dataclass
class SimulationResult:
    p_hat: np.ndarray   # [origin, user] empirical Newsfeed occupancy
    q_hat: np.ndarray   # [origin, user] empirical Wall occupancy
    state: PlatformState
    summary: dict
    trace: list[TraceEvent] | None = None


def _hyper_p1(cv2: float) -> float:
    return 0.5 * (1.0 + math.sqrt((cv2 - 1.0) / (cv2 + 1.0)))


def simulate(
    graph: SocialGraph,
    rates: ActivityRates,
    policy: PolicyConfig | None = None,
    M: int = 20,
    K: int = 10,
    n_events: int = 300_000,
    seed: int = 0,
    warmup_frac: float = 0.2,
    record_trace: bool = False,
    track_conservation: bool = True,
) -> SimulationResult:
    """Run exactly n_events post/re-post events and return empirical influence.

    A re-post attempt on an empty Newsfeed is skipped and counted (the platform has
    no content to share yet). The first warmup_frac of events is excluded from the
    occupancy averages. Trace recording emits the solver-compatible quadruple per
    event, with re-posts referencing the post_id actually re-shared.
    """
    if policy is None:
        policy = PolicyConfig()
    n = graph.n_users
    if rates.n_users != n:
        raise ValueError("rates dimension does not match graph")
    if M < 1 or K < 1:
        raise ValueError("M and K must be >= 1")
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    if not (0.0 <= warmup_frac < 1.0):
        raise ValueError("warmup_frac must lie in [0, 1)")

    rng = np.random.default_rng(seed)
    lam = rates.lam
    mu = rates.mu

    sel = policy.selection
    ttl_mode = policy.eviction == "ttl"
    fifo_feed = policy.eviction == "fifo_oldest"
    fifo_wall = fifo_feed or ttl_mode  # Walls stay size-capped under ttl
    ttl = policy.ttl or 0.0
    track_pop = sel in ("most_popular", "least_popular")

    arrivals = policy.arrivals
    p1 = _hyper_p1(policy.cv2) if arrivals == "hyperexponential" else 0.0

    def draw_gap(rate: float) -> float:
        if arrivals == "poisson":
            return rng.exponential(1.0 / rate)
        if arrivals == "deterministic":
            return 1.0 / rate
        # two-phase hyperexponential with balanced means and the configured cv2
        if rng.random() < p1:
            return rng.exponential(1.0 / (2.0 * p1 * rate))
        return rng.exponential(1.0 / (2.0 * (1.0 - p1) * rate))

    followers = [graph.followers(i).tolist() for i in range(n)]
    walls = [_ListState() for _ in range(n)]
    feeds = [_ListState() for _ in range(n)]
    repost_counts: dict[int, int] = {}
    trace: list[TraceEvent] | None = [] if record_trace else None

    heap: list = []
    seq = 0
    for u in range(n):
        if lam[u] > 0:
            heapq.heappush(heap, (draw_gap(lam[u]), seq, _POST, u, None))
            seq += 1
        if mu[u] > 0:
            heapq.heappush(heap, (draw_gap(mu[u]), seq, _REPOST, u, None))
            seq += 1
    if not heap:
        raise ValueError("no user has positive activity; nothing to simulate")

    warm_events = int(warmup_frac * n_events)
    t_meas = 0.0 if warm_events == 0 else math.inf
    fired = 0
    skipped = 0
    next_post_id = 0
    now = 0.0

    def insert_fixed(ls: _ListState, post: Post, cap: int, fifo: bool, conserve: bool) -> None:
        ls.integrate(now, t_meas)
        entries = ls.entries
        counts = ls.counts
        if len(entries) >= cap:
            if fifo:
                victim = entries.pop()
                entries.insert(0, post)
            else:
                k = int(rng.integers(0, len(entries)))
                victim = entries[k]
                entries[k] = post
            counts[victim.origin] -= 1
            if conserve:
                ls.out_counts[victim.origin] = ls.out_counts.get(victim.origin, 0) + 1
        else:
            if fifo:
                entries.insert(0, post)
            else:
                entries.append(post)
        counts[post.origin] = counts.get(post.origin, 0) + 1
        if conserve:
            ls.in_counts[post.origin] = ls.in_counts.get(post.origin, 0) + 1

    def deliver(author: int, post: Post) -> None:
        insert_fixed(walls[author], post, K, fifo_wall, False)
        if ttl_mode:
            nonlocal seq
            for f in followers[author]:
                fs = feeds[f]
                fs.integrate(now, t_meas)
                fs.entries.append(post)
                fs.counts[post.origin] = fs.counts.get(post.origin, 0) + 1
                if track_conservation:
                    fs.in_counts[post.origin] = fs.in_counts.get(post.origin, 0) + 1
                heapq.heappush(heap, (now + ttl, seq, _EXPIRE, f, post))
                seq += 1
        else:
            for f in followers[author]:
                insert_fixed(feeds[f], post, M, fifo_feed, track_conservation)

    def select_entry(entries: list[Post]) -> Post:
        if sel == "random":
            return entries[int(rng.integers(0, len(entries)))]
        if sel == "newest":
            if fifo_feed:
                return entries[0]
            if ttl_mode:
                return entries[-1]
            return max(entries, key=lambda e: e.post_id)
        if sel == "most_popular":
            return max(entries, key=lambda e: repost_counts.get(e.root_id, 0))
        return min(entries, key=lambda e: repost_counts.get(e.root_id, 0))

    while fired < n_events:
        t, _, kind, u, payload = heapq.heappop(heap)
        now = t
        if kind == _EXPIRE:
            fs = feeds[u]
            fs.integrate(now, t_meas)
            fs.entries.remove(payload)
            fs.counts[payload.origin] -= 1
            if track_conservation:
                fs.out_counts[payload.origin] = fs.out_counts.get(payload.origin, 0) + 1
            continue
        fired += 1
        if kind == _POST:
            pid = next_post_id
            next_post_id += 1
            post = Post(pid, u, now, pid)
            deliver(u, post)
            if trace is not None:
                trace.append(TraceEvent(pid, now, u, -1))
            heapq.heappush(heap, (now + draw_gap(lam[u]), seq, _POST, u, None))
            seq += 1
        else:
            entries = feeds[u].entries
            if not entries:
                skipped += 1
            else:
                src = select_entry(entries)
                if track_pop:
                    repost_counts[src.root_id] = repost_counts.get(src.root_id, 0) + 1
                pid = next_post_id
                next_post_id += 1
                post = Post(pid, src.origin, now, src.root_id)
                deliver(u, post)
                if trace is not None:
                    trace.append(TraceEvent(pid, now, u, src.post_id))
            heapq.heappush(heap, (now + draw_gap(mu[u]), seq, _REPOST, u, None))
            seq += 1
        if fired == warm_events:
            t_meas = now

    t_end = now
    for ls in walls:
        ls.integrate(t_end, t_meas)
    for ls in feeds:
        ls.integrate(t_end, t_meas)

    window = t_end - (0.0 if warm_events == 0 else t_meas)
    if not window > 0:
        raise RuntimeError("empty measurement window; lower warmup_frac or raise n_events")

    p_hat = np.zeros((n, n))
    q_hat = np.zeros((n, n))
    for j in range(n):
        for o, v in walls[j].occ.items():
            q_hat[o, j] = v / (window * K)
        fs = feeds[j]
        if ttl_mode:
            if fs.len_integral > 0:
                for o, v in fs.occ.items():
                    p_hat[o, j] = v / fs.len_integral
        else:
            for o, v in fs.occ.items():
                p_hat[o, j] = v / (window * M)

    state = PlatformState(
        walls=walls,
        feeds=feeds,
        clock=t_end,
        repost_counts=repost_counts,
        skipped_reposts=skipped,
        conservation_tracked=track_conservation,
    )
    summary = {
        "n_users": n,
        "n_events": n_events,
        "warmup_events": warm_events,
        "skipped_reposts": skipped,
        "seed": seed,
        "policy": {
            "selection": policy.selection,
            "eviction": policy.eviction,
            "arrivals": policy.arrivals,
            "ttl": policy.ttl,
            "cv2": policy.cv2 if policy.arrivals == "hyperexponential" else None,
        },
        "M": M,
        "K": K,
        "t_end": t_end,
        "measure_window": (0.0 if warm_events == 0 else t_meas, t_end),
        "mean_feed_len": [fs.len_integral / window for fs in feeds],
    }
    return SimulationResult(p_hat=p_hat, q_hat=q_hat, state=state, summary=summary, trace=trace)


def check_conservation(state: PlatformState, origin: int, user: int) -> bool:
    """Exact integer identity 0 + arrivals = departures + present for one (origin, Newsfeed) pair."""
    if not state.conservation_tracked:
        raise ValueError("run the simulation with track_conservation=True")
    fs = state.feeds[user]
    arrived = fs.in_counts.get(origin, 0)
    left = fs.out_counts.get(origin, 0)
    present = fs.counts.get(origin, 0)
    return arrived == left + present


def conservation_violations(state: PlatformState) -> list[tuple[int, int, int, int, int]]:
    """(user, origin, in, out, present) for every violated pair; empty means all hold."""
    if not state.conservation_tracked:
        raise ValueError("run the simulation with track_conservation=True")
    bad = []
    for user, fs in enumerate(state.feeds):
        origins = set(fs.in_counts) | set(fs.out_counts) | {o for o, c in fs.counts.items() if c}
        for o in origins:
            arrived = fs.in_counts.get(o, 0)
            left = fs.out_counts.get(o, 0)
            present = fs.counts.get(o, 0)
            if arrived != left + present:
                bad.append((user, o, arrived, left, present))
    return bad
