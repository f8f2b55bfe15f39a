"""Event ingestion: parse share / retweet / label files, choose the outlet set,
and build the user-outlet count matrix and the retweet graph.

Events are held column-wise (:class:`ShareTable`, :class:`RetweetTable`,
:class:`LabelTable`) so that paper-scale inputs (millions of rows) fit in
memory.  Every public function that takes events also accepts a plain
sequence of the corresponding event dataclass.
"""

from __future__ import annotations

import csv
import json
import logging
from array import array
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .errors import DataError

log = logging.getLogger(__name__)

SHARES_HEADER = ("user_id", "outlet_id", "timestamp")
RETWEETS_HEADER = ("retweeted_user", "retweeting_user", "timestamp", "has_news_link")
LABELS_HEADER = ("user_id", "start", "end", "label")

LABELS = ("CL", "CR")
_BOOLS = {"0": False, "1": True, "false": False, "true": True}
_JSONL_SUFFIXES = {".jsonl", ".ndjson", ".json"}


# --------------------------------------------------------------------------
# Event records
# --------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ShareEvent:
    user_id: str
    outlet_id: str
    timestamp: int

    def __post_init__(self):
        if not self.user_id or not self.outlet_id:
            raise DataError("share event needs non-empty user_id and outlet_id")
        if self.timestamp < 0:
            raise DataError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True, slots=True)
class RetweetEvent:
    """One retweet; the edge runs from ``retweeted_user`` to ``retweeting_user``."""

    retweeted_user: str
    retweeting_user: str
    timestamp: int
    has_news_link: bool = False

    def __post_init__(self):
        if not self.retweeted_user or not self.retweeting_user:
            raise DataError("retweet event needs two non-empty user ids")
        if self.timestamp < 0:
            raise DataError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True, slots=True)
class LabelInterval:
    """Label active on ``[start, end)``."""

    user_id: str
    start: int
    end: int
    label: str

    def __post_init__(self):
        if not self.user_id:
            raise DataError("label interval needs a non-empty user_id")
        if self.label not in LABELS:
            raise DataError(f"label must be one of {LABELS}, got {self.label!r}")
        if not self.start < self.end:
            raise DataError(f"empty label interval [{self.start}, {self.end})")


# --------------------------------------------------------------------------
# Columnar tables
# --------------------------------------------------------------------------


def _encode(ids: Iterable[str], vocab: dict[str, int]) -> array:
    codes = array("q")
    for uid in ids:
        code = vocab.get(uid)
        if code is None:
            code = vocab[uid] = len(vocab)
        codes.append(code)
    return codes


def _as_int64(a) -> np.ndarray:
    return np.frombuffer(a, dtype=np.int64).copy() if isinstance(a, array) else np.asarray(a, dtype=np.int64)


@dataclass
class ShareTable:
    """Share events in file order; ``user``/``outlet`` are codes into the id lists."""

    user_ids: list[str]
    outlet_ids: list[str]
    user: np.ndarray
    outlet: np.ndarray
    timestamp: np.ndarray
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.user)

    @classmethod
    def from_events(cls, events: Iterable[ShareEvent]) -> ShareTable:
        events = list(events)
        users: dict[str, int] = {}
        outlets: dict[str, int] = {}
        user = _as_int64(_encode((e.user_id for e in events), users))
        outlet = _as_int64(_encode((e.outlet_id for e in events), outlets))
        timestamp = np.array([e.timestamp for e in events], dtype=np.int64)
        return cls(list(users), list(outlets), user, outlet, timestamp)

    def to_events(self) -> list[ShareEvent]:
        u, o = self.user_ids, self.outlet_ids
        return [
            ShareEvent(u[a], o[b], int(t))
            for a, b, t in zip(self.user.tolist(), self.outlet.tolist(), self.timestamp.tolist())
        ]

    def subset(self, mask: np.ndarray) -> ShareTable:
        return ShareTable(
            self.user_ids, self.outlet_ids, self.user[mask], self.outlet[mask], self.timestamp[mask]
        )


@dataclass
class RetweetTable:
    """Retweet events in file order; ``source`` is the retweeted user."""

    user_ids: list[str]
    source: np.ndarray
    target: np.ndarray
    timestamp: np.ndarray
    has_news_link: np.ndarray
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.source)

    @classmethod
    def from_events(cls, events: Iterable[RetweetEvent]) -> RetweetTable:
        events = list(events)
        vocab: dict[str, int] = {}
        pairs = _encode((uid for e in events for uid in (e.retweeted_user, e.retweeting_user)), vocab)
        codes = _as_int64(pairs).reshape(-1, 2)
        return cls(
            user_ids=list(vocab),
            source=codes[:, 0].copy(),
            target=codes[:, 1].copy(),
            timestamp=np.array([e.timestamp for e in events], dtype=np.int64),
            has_news_link=np.array([e.has_news_link for e in events], dtype=bool),
        )

    def to_events(self) -> list[RetweetEvent]:
        ids = self.user_ids
        return [
            RetweetEvent(ids[s], ids[t], int(ts), bool(n))
            for s, t, ts, n in zip(
                self.source.tolist(), self.target.tolist(), self.timestamp.tolist(), self.has_news_link.tolist()
            )
        ]


@dataclass
class LabelTable:
    """Label intervals; ``label`` is +1 for CR and -1 for CL."""

    user_ids: list[str]
    user: np.ndarray
    start: np.ndarray
    end: np.ndarray
    label: np.ndarray
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.user)

    @classmethod
    def from_events(cls, intervals: Iterable[LabelInterval]) -> LabelTable:
        intervals = list(intervals)
        vocab: dict[str, int] = {}
        user = _as_int64(_encode((iv.user_id for iv in intervals), vocab))
        return cls(
            user_ids=list(vocab),
            user=user,
            start=np.array([iv.start for iv in intervals], dtype=np.int64),
            end=np.array([iv.end for iv in intervals], dtype=np.int64),
            label=np.array([1 if iv.label == "CR" else -1 for iv in intervals], dtype=np.int8),
        )

    def to_events(self) -> list[LabelInterval]:
        ids = self.user_ids
        return [
            LabelInterval(ids[u], int(s), int(e), "CR" if lab > 0 else "CL")
            for u, s, e, lab in zip(self.user.tolist(), self.start.tolist(), self.end.tolist(), self.label.tolist())
        ]

    def check_disjoint(self) -> None:
        """Raise :class:`DataError` if two intervals of one user overlap."""
        if len(self) < 2:
            return
        order = np.lexsort((self.start, self.user))
        u, s, e = self.user[order], self.start[order], self.end[order]
        same = u[1:] == u[:-1]
        clash = np.flatnonzero(same & (s[1:] < e[:-1]))
        if clash.size:
            i = clash[0]
            raise DataError(
                f"overlapping label intervals for user {self.user_ids[u[i]]!r}: "
                f"[{s[i]}, {e[i]}) and [{s[i + 1]}, {e[i + 1]})"
            )


def as_share_table(events: ShareTable | Sequence[ShareEvent]) -> ShareTable:
    return events if isinstance(events, ShareTable) else ShareTable.from_events(events)


def as_retweet_table(events: RetweetTable | Sequence[RetweetEvent]) -> RetweetTable:
    return events if isinstance(events, RetweetTable) else RetweetTable.from_events(events)


def as_label_table(intervals: LabelTable | Sequence[LabelInterval]) -> LabelTable:
    return intervals if isinstance(intervals, LabelTable) else LabelTable.from_events(intervals)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


class _Malformed(Exception):
    pass


def _json_field(value) -> str | None:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return None


def _rows(path: Path, header: tuple[str, ...]) -> Iterator[tuple[int, tuple | None]]:
    """Yield ``(line number, fields in header order)``; fields is None for a bad row."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        if path.suffix.lower() in _JSONL_SUFFIXES:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    yield lineno, None
                    continue
                if not isinstance(obj, dict) or any(k not in obj for k in header):
                    yield lineno, None
                    continue
                fields = tuple(_json_field(obj[k]) for k in header)
                yield lineno, None if None in fields else fields
            return

        reader = csv.reader(fh)
        try:
            found = next(reader)
        except StopIteration:
            return
        except (csv.Error, UnicodeDecodeError) as exc:
            raise DataError(f"{path}: unreadable header: {exc}") from exc
        found = [h.strip() for h in found]
        missing = [h for h in header if h not in found]
        if missing:
            raise DataError(f"{path}: header {found} lacks column(s) {missing}")
        width = len(found)
        idx = [found.index(h) for h in header]
        try:
            for row in reader:
                if not row:
                    continue
                if len(row) != width:
                    yield reader.line_num, None
                else:
                    yield reader.line_num, tuple(row[i] for i in idx)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise DataError(f"{path}:{reader.line_num}: {exc}") from exc


def _nonneg_int(text: str, name: str) -> int:
    if text.isascii() and text.isdigit():
        return int(text)
    raise _Malformed(f"{name} must be a non-negative integer, got {text!r}")


class _SkipLog:
    def __init__(self, path: Path, strict: bool):
        self.path, self.strict = path, strict
        self.count = 0
        self.first: tuple[int, str] | None = None

    def __call__(self, lineno: int, reason: str) -> None:
        if self.strict:
            raise DataError(f"{self.path}:{lineno}: {reason}")
        self.count += 1
        if self.first is None:
            self.first = (lineno, reason)

    def close(self) -> int:
        if self.count:
            lineno, reason = self.first
            log.warning(
                "%s: skipped %d malformed line(s); first at line %d: %s", self.path, self.count, lineno, reason
            )
        return self.count


def read_shares(path: str | Path, strict: bool = False) -> ShareTable:
    """Load a shares CSV/JSONL file into a :class:`ShareTable`."""
    path = Path(path)
    skip = _SkipLog(path, strict)
    users: dict[str, int] = {}
    outlets: dict[str, int] = {}
    u_col, o_col, t_col = array("q"), array("q"), array("q")
    for lineno, fields in _rows(path, SHARES_HEADER):
        try:
            if fields is None:
                raise _Malformed("wrong number of fields or unparseable record")
            uid, oid, ts = fields
            if not uid:
                raise _Malformed("empty user_id")
            if not oid:
                raise _Malformed("empty outlet_id")
            ts = _nonneg_int(ts, "timestamp")
        except _Malformed as exc:
            skip(lineno, str(exc))
            continue
        code = users.get(uid)
        if code is None:
            code = users[uid] = len(users)
        u_col.append(code)
        code = outlets.get(oid)
        if code is None:
            code = outlets[oid] = len(outlets)
        o_col.append(code)
        t_col.append(ts)
    return ShareTable(
        list(users), list(outlets), _as_int64(u_col), _as_int64(o_col), _as_int64(t_col), skipped=skip.close()
    )


def read_retweets(path: str | Path, strict: bool = False) -> RetweetTable:
    """Load a retweets CSV/JSONL file into a :class:`RetweetTable`."""
    path = Path(path)
    skip = _SkipLog(path, strict)
    users: dict[str, int] = {}
    s_col, d_col, t_col = array("q"), array("q"), array("q")
    n_col = bytearray()
    for lineno, fields in _rows(path, RETWEETS_HEADER):
        try:
            if fields is None:
                raise _Malformed("wrong number of fields or unparseable record")
            src, dst, ts, flag = fields
            if not src or not dst:
                raise _Malformed("empty user id")
            ts = _nonneg_int(ts, "timestamp")
            flag = _BOOLS.get(flag.lower())
            if flag is None:
                raise _Malformed(f"has_news_link must be one of 0/1/true/false, got {fields[3]!r}")
        except _Malformed as exc:
            skip(lineno, str(exc))
            continue
        code = users.get(src)
        if code is None:
            code = users[src] = len(users)
        s_col.append(code)
        code = users.get(dst)
        if code is None:
            code = users[dst] = len(users)
        d_col.append(code)
        t_col.append(ts)
        n_col.append(flag)
    return RetweetTable(
        list(users),
        _as_int64(s_col),
        _as_int64(d_col),
        _as_int64(t_col),
        np.frombuffer(bytes(n_col), dtype=np.uint8).astype(bool),
        skipped=skip.close(),
    )


def read_labels(path: str | Path, strict: bool = False) -> LabelTable:
    """Load a labels CSV/JSONL file; overlapping intervals are always fatal."""
    path = Path(path)
    skip = _SkipLog(path, strict)
    users: dict[str, int] = {}
    u_col, s_col, e_col = array("q"), array("q"), array("q")
    l_col = array("b")
    for lineno, fields in _rows(path, LABELS_HEADER):
        try:
            if fields is None:
                raise _Malformed("wrong number of fields or unparseable record")
            uid, start, end, label = fields
            if not uid:
                raise _Malformed("empty user_id")
            start = _nonneg_int(start, "start")
            end = _nonneg_int(end, "end")
            if start >= end:
                raise _Malformed(f"start {start} is not before end {end}")
            if label not in LABELS:
                raise _Malformed(f"label must be CL or CR, got {label!r}")
        except _Malformed as exc:
            skip(lineno, str(exc))
            continue
        code = users.get(uid)
        if code is None:
            code = users[uid] = len(users)
        u_col.append(code)
        s_col.append(start)
        e_col.append(end)
        l_col.append(1 if label == "CR" else -1)
    table = LabelTable(
        list(users),
        _as_int64(u_col),
        _as_int64(s_col),
        _as_int64(e_col),
        np.frombuffer(l_col, dtype=np.int8).copy(),
        skipped=skip.close(),
    )
    table.check_disjoint()
    return table


_READERS = {"shares": read_shares, "retweets": read_retweets, "labels": read_labels}


class ParsedEvents(NamedTuple):
    events: list
    skipped: int


def parse_events(path: str | Path, kind: str, strict: bool = False) -> ParsedEvents:
    """Parse an event file into typed records.

    Parameters
    ----------
    path : str or Path
        CSV file with a header row, or JSON-lines (``.jsonl``/``.ndjson``).
    kind : {"shares", "retweets", "labels"}
    strict : bool
        Raise :class:`DataError` on the first malformed line instead of
        skipping it with a warning.

    Returns
    -------
    ParsedEvents
        ``(events, skipped)`` with events in file order.
    """
    try:
        reader = _READERS[kind]
    except KeyError:
        raise ValueError(f"kind must be one of {sorted(_READERS)}, got {kind!r}") from None
    table = reader(path, strict=strict)
    return ParsedEvents(table.to_events(), table.skipped)


# --------------------------------------------------------------------------
# Outlet selection and the count matrix
# --------------------------------------------------------------------------


def outlet_share_counts(events: ShareTable | Sequence[ShareEvent]) -> dict[str, int]:
    table = as_share_table(events)
    totals = np.bincount(table.outlet, minlength=len(table.outlet_ids))
    return {oid: int(n) for oid, n in zip(table.outlet_ids, totals) if n > 0}


def select_top_outlets(
    events: ShareTable | Sequence[ShareEvent], k: int, allowlist: Iterable[str] | None = None
) -> list[str]:
    """Rank outlets by total share count (descending, ties by id) and keep the top ``k``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    totals = outlet_share_counts(events)
    if allowlist is not None:
        allowed = set(allowlist)
        totals = {oid: n for oid, n in totals.items() if oid in allowed}
    ranked = sorted(totals, key=lambda oid: (-totals[oid], oid))
    if len(ranked) < k:
        log.warning("only %d distinct outlet(s) available, fewer than k=%d", len(ranked), k)
    return ranked[:k]


def retention(events: ShareTable | Sequence[ShareEvent], outlets: Iterable[str]) -> dict[str, float]:
    """Fractions of users and events kept when restricting to ``outlets``."""
    table = as_share_table(events)
    keep = _outlet_mask(table, outlets)
    n_users = len(np.unique(table.user))
    return {
        "events": float(keep.mean()) if len(table) else 0.0,
        "users": len(np.unique(table.user[keep])) / n_users if n_users else 0.0,
    }


def _outlet_mask(table: ShareTable, outlets: Iterable[str]) -> np.ndarray:
    wanted = set(outlets)
    keep_code = np.array([oid in wanted for oid in table.outlet_ids], dtype=bool)
    return keep_code[table.outlet] if len(keep_code) else np.zeros(len(table), dtype=bool)


@dataclass(frozen=True, eq=False)
class BipartiteCounts:
    """Sparse user x outlet share counts ``Y`` with its row/column id maps.

    Rows are users (sorted by id as produced by :func:`build_counts`),
    columns are outlets.  Every row and column holds at least one share.
    """

    user_ids: list[str]
    outlet_ids: list[str]
    counts: sparse.csr_matrix
    grand_total: int

    def __post_init__(self):
        Y = self.counts
        if Y.shape != (len(self.user_ids), len(self.outlet_ids)):
            raise DataError(f"count matrix shape {Y.shape} does not match id maps")
        if len(set(self.user_ids)) != len(self.user_ids) or len(set(self.outlet_ids)) != len(self.outlet_ids):
            raise DataError("user and outlet ids must be unique")
        if Y.nnz and Y.data.min() < 0:
            raise DataError("counts must be non-negative")
        total = int(Y.sum())
        if total <= 0 or total != self.grand_total:
            raise DataError(f"grand_total {self.grand_total} inconsistent with stored counts ({total})")
        if (self.row_sums == 0).any():
            raise DataError("every user row needs at least one share")
        if (self.col_sums == 0).any():
            raise DataError("every outlet column needs at least one share")

    @classmethod
    def from_dense(cls, Y, user_ids: Sequence[str] | None = None, outlet_ids: Sequence[str] | None = None):
        Y = np.asarray(Y)
        if not np.issubdtype(Y.dtype, np.integer):
            if not np.array_equal(Y, np.round(Y)):
                raise DataError("counts must be integers")
            Y = Y.astype(np.int64)
        m, n = Y.shape
        user_ids = list(user_ids) if user_ids is not None else [f"u{i}" for i in range(m)]
        outlet_ids = list(outlet_ids) if outlet_ids is not None else [f"o{j}" for j in range(n)]
        return cls(user_ids, outlet_ids, sparse.csr_matrix(Y.astype(np.int64)), int(Y.sum()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @cached_property
    def row_sums(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=1)).ravel()

    @cached_property
    def col_sums(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=0)).ravel()

    @cached_property
    def user_index(self) -> dict[str, int]:
        return {uid: i for i, uid in enumerate(self.user_ids)}

    @cached_property
    def outlet_index(self) -> dict[str, int]:
        return {oid: j for j, oid in enumerate(self.outlet_ids)}

    def toarray(self) -> np.ndarray:
        return self.counts.toarray()


def build_counts(events: ShareTable | Sequence[ShareEvent], outlets: Sequence[str]) -> BipartiteCounts:
    """Count shares per (user, outlet) for the chosen outlets.

    Users with no retained share are dropped; outlets in ``outlets`` that no
    retained event references are dropped with a warning.
    """
    outlets = list(dict.fromkeys(outlets))
    if not outlets:
        raise DataError("outlet set is empty")
    table = as_share_table(events)
    col_of = {oid: j for j, oid in enumerate(outlets)}
    code_to_col = np.array([col_of.get(oid, -1) for oid in table.outlet_ids], dtype=np.int64)
    cols = code_to_col[table.outlet] if len(code_to_col) else np.empty(0, dtype=np.int64)
    keep = cols >= 0
    if not keep.any():
        raise DataError("no share events survive outlet filtering")
    cols = cols[keep]
    user_codes = table.user[keep]

    present = np.unique(user_codes)
    present_ids = [table.user_ids[c] for c in present.tolist()]
    order = sorted(range(len(present_ids)), key=present_ids.__getitem__)
    code_to_row = np.full(len(table.user_ids), -1, dtype=np.int64)
    code_to_row[present[order]] = np.arange(len(order))
    rows = code_to_row[user_codes]

    used = np.bincount(cols, minlength=len(outlets)) > 0
    if not used.all():
        dropped = [oid for oid, u in zip(outlets, used) if not u]
        log.warning("dropping outlet(s) with no retained shares: %s", ", ".join(dropped))
        remap = np.cumsum(used) - 1
        cols = remap[cols]
        outlets = [oid for oid, u in zip(outlets, used) if u]

    Y = sparse.csr_matrix(
        (np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(len(order), len(outlets))
    )
    Y.sum_duplicates()
    return BipartiteCounts([present_ids[i] for i in order], outlets, Y, int(len(rows)))


# --------------------------------------------------------------------------
# Retweet graph
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RetweetGraph:
    """Directed weighted retweet graph; an edge ``s -> t`` means t retweeted s.

    Edges are unique ``(source, target)`` pairs sorted lexicographically by
    node ordinal; ``weight`` counts the retweets aggregated into each edge.
    """

    node_ids: list[str]
    source: np.ndarray
    target: np.ndarray
    weight: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return len(self.source)

    @property
    def total_weight(self) -> int:
        return int(self.weight.sum())

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {uid: i for i, uid in enumerate(self.node_ids)}

    def edges(self) -> dict[tuple[str, str], int]:
        ids = self.node_ids
        return {
            (ids[s], ids[t]): int(w)
            for s, t, w in zip(self.source.tolist(), self.target.tolist(), self.weight.tolist())
        }


def build_retweet_graph(
    events: RetweetTable | Sequence[RetweetEvent], exclude_news_links: bool = True
) -> RetweetGraph:
    """Aggregate retweets into a weighted directed graph without self-loops."""
    table = as_retweet_table(events)
    keep = table.source != table.target
    if exclude_news_links:
        keep &= ~table.has_news_link
    if not keep.any():
        raise DataError("no retweet events survive filtering")
    src, dst = table.source[keep], table.target[keep]

    present = np.unique(np.concatenate([src, dst]))
    present_ids = [table.user_ids[c] for c in present.tolist()]
    order = sorted(range(len(present_ids)), key=present_ids.__getitem__)
    code_to_node = np.full(len(table.user_ids), -1, dtype=np.int64)
    code_to_node[present[order]] = np.arange(len(order))

    n = len(order)
    key = code_to_node[src] * n + code_to_node[dst]
    key, weight = np.unique(key, return_counts=True)
    return RetweetGraph(
        [present_ids[i] for i in order], key // n, key % n, weight.astype(np.int64)
    )
