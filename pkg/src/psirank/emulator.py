"""Trace replay: empirical influence measured directly from Wall occupancy times.

Each user's Wall is modelled as a single FIFO slot: every post or re-post by user j
replaces whatever is on j's Wall with content whose origin is resolved through the
re-post chain. q_emu[i][j] is the fraction of the measurement window during which
origin-i content sits on j's Wall; the per-user score averages q_emu[i][j] over the
other users j != i (self-influence on one's own Wall is excluded from the score).
No model assumption or social graph is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TraceEvent", "ReplayResult", "replay", "resolve_origin"]


@dataclass(frozen=True)
class TraceEvent:
    """One post/re-post record: repost_id is -1 for originals, else the re-shared post."""

    post_id: int
    timestamp: float
    user_id: int
    repost_id: int = -1


@dataclass
class ReplayResult:
    """Sparse empirical influence and per-user scores from one replay pass."""

    q_emu: dict[int, dict[int, float]]  # origin -> user -> occupancy fraction
    psi: np.ndarray                     # per-user score over the other users' Walls
    n_users: int
    window: tuple[float, float]
    dropped_events: int                 # re-posts whose source post was unknown

    def occupancy(self, origin: int, user: int) -> float:
        return self.q_emu.get(origin, {}).get(user, 0.0)

    def row_sum(self, user: int) -> float:
        """Total occupied fraction of a user's Wall (<= 1)."""
        return sum(row.get(user, 0.0) for row in self.q_emu.values())


def resolve_origin(event: TraceEvent, post_index: dict, _cache: dict | None = None) -> int:
    """Author of the original post behind an event, chasing re-post links to -1.

    post_index maps post_id -> (author, repost_id). Raises KeyError for an unknown
    link and ValueError naming the offending ids if the links form a cycle.
    """
    if event.repost_id == -1:
        return event.user_id
    seen = [event.post_id]
    pid = event.repost_id
    while True:
        if _cache is not None and pid in _cache:
            return _cache[pid]
        author, parent = post_index[pid]
        if parent == -1:
            if _cache is not None:
                for s in seen:
                    _cache[s] = author
                _cache[pid] = author
            return author
        if pid in seen:
            cyc = seen[seen.index(pid):] + [pid]
            raise ValueError(f"cycle in repost links: {' -> '.join(map(str, cyc))}")
        seen.append(pid)
        pid = parent


def replay(events, window: tuple[float, float] | None = None, n_users: int | None = None) -> ReplayResult:
    """Single streaming pass over time-sorted events; memory scales with users + posts.

    The window defaults to (first event time, last event time) and must cover all
    events. Events sharing a timestamp must arrive in ascending post_id order (the
    tie rule parse_trace applies). Re-posts referencing an unknown post are dropped
    and tallied, leaving the Wall unchanged.
    """
    events = list(events)
    if window is None:
        if not events:
            raise ValueError("cannot infer a window from an empty trace")
        window = (events[0].timestamp, events[-1].timestamp)
    t_start, t_end = float(window[0]), float(window[1])
    if not t_end > t_start:
        raise ValueError(f"empty window ({t_start}, {t_end})")
    duration = t_end - t_start

    post_index: dict[int, tuple[int, int]] = {}
    origin_cache: dict[int, int] = {}
    slot_origin: dict[int, int] = {}
    slot_since: dict[int, float] = {}
    occ: dict[int, dict[int, float]] = {}
    dropped = 0
    max_uid = -1
    prev_key = None

    for ev in events:
        t = ev.timestamp
        if not (t_start <= t <= t_end):
            raise ValueError(f"event {ev.post_id} at {t} outside the window")
        key = (t, ev.post_id)
        if prev_key is not None and key < prev_key:
            raise ValueError("events must be sorted by (timestamp, post_id)")
        prev_key = key
        post_index[ev.post_id] = (ev.user_id, ev.repost_id)
        max_uid = max(max_uid, ev.user_id)
        try:
            origin = resolve_origin(ev, post_index, origin_cache)
        except KeyError:
            dropped += 1
            continue
        origin_cache[ev.post_id] = origin
        u = ev.user_id
        held = slot_origin.get(u)
        if held is not None:
            row = occ.setdefault(held, {})
            row[u] = row.get(u, 0.0) + (t - slot_since[u])
        slot_origin[u] = origin
        slot_since[u] = t

    for u, held in slot_origin.items():
        row = occ.setdefault(held, {})
        row[u] = row.get(u, 0.0) + (t_end - slot_since[u])

    if n_users is None:
        n_users = max_uid + 1 if max_uid >= 0 else 0
    q_emu = {
        origin: {u: secs / duration for u, secs in row.items()}
        for origin, row in occ.items()
    }
    psi = np.zeros(n_users)
    for origin, row in q_emu.items():
        for u, val in row.items():
            if u != origin:
                psi[origin] += val
    if n_users > 1:
        psi /= n_users - 1
    return ReplayResult(q_emu=q_emu, psi=psi, n_users=n_users, window=(t_start, t_end), dropped_events=dropped)
