"""Trace parsing, activity-rate estimation, and Star-graph inference.

Raw traces carry one `post_id, timestamp, user_id, repost_id` record per line (CSV
or TSV, header optional, -1 marking originals). External user and post ids of any
shape are remapped to dense integers here; everything downstream works on the dense
ids and joins back through the emitted sidecar maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .emulator import TraceEvent, resolve_origin
from .graph import SocialGraph, build_graph
from .model import ActivityRates

__all__ = [
    "ParsedTrace",
    "RateEstimate",
    "TraceParseError",
    "parse_trace",
    "estimate_rates",
    "infer_star_graph",
]


class TraceParseError(ValueError):
    pass


@dataclass
class ParsedTrace:
    """Events sorted by (timestamp, post_id) plus the id maps back to raw tokens."""

    events: list[TraceEvent]
    user_ids: list[str]          # internal user id -> external token
    post_ids: list[str]          # internal post id -> external token
    diagnostics: list[tuple[int, str]]  # (line number, reason) per skipped line

    @property
    def n_users(self) -> int:
        return len(self.user_ids)


@dataclass
class RateEstimate:
    """Per-user trace-frequency estimates with the raw event counts behind them."""

    rates: ActivityRates
    post_counts: np.ndarray
    repost_counts: np.ndarray
    flagged: np.ndarray          # users with no activity in the trace
    window: tuple[float, float]


def _parse_timestamp(token: str) -> float:
    token = token.strip()
    try:
        return float(token)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(token.replace("Z", "+00:00")).timestamp()
    except ValueError as exc:
        raise ValueError(f"unparseable timestamp {token!r}") from exc


def parse_trace(path, error_budget: int = 0) -> ParsedTrace:
    """Parse, remap, and time-sort a trace file.

    Malformed lines are reported with their line number and skipped, up to
    error_budget of them; one more aborts with a TraceParseError summarising the
    diagnostics. Timestamps may be numeric seconds or ISO-8601. A repost_id token
    is remapped even when its defining line is absent (resolution deals with it).
    """
    users: dict[str, int] = {}
    posts: dict[str, int] = {}
    user_list: list[str] = []
    post_list: list[str] = []
    events: list[TraceEvent] = []
    diagnostics: list[tuple[int, str]] = []

    def user_id(token: str) -> int:
        uid = users.get(token)
        if uid is None:
            uid = len(user_list)
            users[token] = uid
            user_list.append(token)
        return uid

    def post_id(token: str) -> int:
        pid = posts.get(token)
        if pid is None:
            pid = len(post_list)
            posts[token] = pid
            post_list.append(token)
        return pid

    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            delim = "\t" if "\t" in line else ","
            fields = [f.strip() for f in line.split(delim)]
            try:
                if len(fields) != 4:
                    raise ValueError(f"expected 4 fields, got {len(fields)}")
                ts = _parse_timestamp(fields[1])
                pid = post_id(fields[0])
                uid = user_id(fields[2])
                rid = -1 if fields[3] == "-1" else post_id(fields[3])
                events.append(TraceEvent(pid, ts, uid, rid))
            except ValueError as exc:
                if line_no == 1 and not events and not diagnostics and _looks_like_header(fields):
                    continue
                diagnostics.append((line_no, str(exc)))
                if len(diagnostics) > error_budget:
                    detail = "; ".join(f"line {n}: {m}" for n, m in diagnostics)
                    raise TraceParseError(
                        f"{len(diagnostics)} malformed line(s) exceeded the budget of {error_budget}: {detail}"
                    ) from None
    events.sort(key=lambda e: (e.timestamp, e.post_id))
    return ParsedTrace(events=events, user_ids=user_list, post_ids=post_list, diagnostics=diagnostics)


def _looks_like_header(fields: list[str]) -> bool:
    if len(fields) != 4:
        return False
    try:
        float(fields[1])
        return False
    except ValueError:
        return any(c.isalpha() for c in "".join(fields))


def estimate_rates(events, window: tuple[float, float], n_users: int | None = None) -> RateEstimate:
    """Per-user posting/re-posting frequencies: event counts over the window length.

    Users present in the id space but absent from the trace get (0, 0) and are
    flagged; by construction sum(post_counts) equals the number of original posts
    seen, which pins the estimates to the trace exactly.
    """
    t0, t1 = float(window[0]), float(window[1])
    duration = t1 - t0
    if not duration > 0:
        raise ValueError(f"window ({t0}, {t1}) has non-positive length")
    events = list(events)
    if n_users is None:
        n_users = max((e.user_id for e in events), default=-1) + 1
    post_counts = np.zeros(n_users, dtype=np.int64)
    repost_counts = np.zeros(n_users, dtype=np.int64)
    for e in events:
        if e.repost_id == -1:
            post_counts[e.user_id] += 1
        else:
            repost_counts[e.user_id] += 1
    rates = ActivityRates(post_counts / duration, repost_counts / duration)
    return RateEstimate(
        rates=rates,
        post_counts=post_counts,
        repost_counts=repost_counts,
        flagged=rates.inactive_users(),
        window=(t0, t1),
    )


def infer_star_graph(events, n_users: int | None = None) -> tuple[SocialGraph, int]:
    """Follower graph linking every re-poster to the resolved original author.

    One edge per distinct (re-poster, origin) pair, re-posts of one's own content
    dropped. Returns the graph and the count of re-posts whose source post could
    not be resolved (they contribute no edge).
    """
    events = list(events)
    if n_users is None:
        n_users = max((e.user_id for e in events), default=-1) + 1
    post_index: dict[int, tuple[int, int]] = {}
    cache: dict[int, int] = {}
    pairs: set[tuple[int, int]] = set()
    unresolved = 0
    for e in events:
        post_index[e.post_id] = (e.user_id, e.repost_id)
        if e.repost_id == -1:
            cache[e.post_id] = e.user_id
            continue
        try:
            origin = resolve_origin(e, post_index, cache)
        except KeyError:
            unresolved += 1
            continue
        cache[e.post_id] = origin
        if origin != e.user_id:
            pairs.add((e.user_id, origin))
    edges = np.asarray(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return build_graph(edges, n_users), unresolved
