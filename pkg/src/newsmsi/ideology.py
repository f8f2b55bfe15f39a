"""Ideology valence: join share events with time-varying CL/CR labels.

A share counts toward ``#CR`` (``#CL``) when the user carries a CR (CL)
label at the share's timestamp; shares outside every label interval are
ignored, and users without any labelled share get no score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .ingest import LabelInterval, LabelTable, ShareEvent, ShareTable, as_label_table, as_share_table


@dataclass(frozen=True, slots=True)
class IvScore:
    user_id: str
    cr_count: int
    cl_count: int

    def __post_init__(self):
        if self.cr_count < 0 or self.cl_count < 0 or self.cr_count + self.cl_count < 1:
            raise DataError(f"IV needs at least one labelled share for {self.user_id!r}")

    @property
    def iv(self) -> float:
        return (self.cr_count - self.cl_count) / (self.cr_count + self.cl_count)


def label_at(intervals: Sequence[LabelInterval], t: int) -> str | None:
    """Label whose ``[start, end)`` contains ``t``, or None."""
    ordered = sorted(intervals, key=lambda iv: iv.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise DataError(f"overlapping label intervals [{a.start}, {a.end}) and [{b.start}, {b.end})")
    for iv in ordered:
        if iv.start <= t < iv.end:
            return iv.label
    return None


@dataclass(frozen=True, eq=False)
class ValenceTable:
    """Column form of the IV scores, users sorted by id."""

    user_ids: list[str]
    cr_count: np.ndarray
    cl_count: np.ndarray

    @property
    def iv(self) -> np.ndarray:
        return (self.cr_count - self.cl_count) / (self.cr_count + self.cl_count)

    def __len__(self) -> int:
        return len(self.user_ids)

    def scores(self) -> dict[str, IvScore]:
        return {
            uid: IvScore(uid, int(cr), int(cl))
            for uid, cr, cl in zip(self.user_ids, self.cr_count.tolist(), self.cl_count.tolist())
        }

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.user_ids, self.iv.tolist()))


def valence_table(
    shares: ShareTable | Sequence[ShareEvent], intervals: LabelTable | Sequence[LabelInterval]
) -> ValenceTable:
    """Per-user CR/CL share counts, vectorised over all events."""
    shares = as_share_table(shares)
    labels = as_label_table(intervals)
    labels.check_disjoint()
    empty = ValenceTable([], np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    if not len(shares) or not len(labels):
        return empty

    share_code = {uid: i for i, uid in enumerate(shares.user_ids)}
    to_share_code = np.array([share_code.get(uid, -1) for uid in labels.user_ids], dtype=np.int64)
    lab_user = to_share_code[labels.user]
    has_shares = lab_user >= 0
    lab_user, lab_start = lab_user[has_shares], labels.start[has_shares]
    lab_end, lab_sign = labels.end[has_shares], labels.label[has_shares]
    order = np.lexsort((lab_start, lab_user))
    lab_user, lab_start, lab_end, lab_sign = lab_user[order], lab_start[order], lab_end[order], lab_sign[order]

    # merge intervals (kind 0) and shares (kind 1) by (user, time); at equal
    # time the interval start sorts first so starts are inclusive
    n_lab = len(lab_user)
    user = np.concatenate([lab_user, shares.user])
    time = np.concatenate([lab_start, shares.timestamp])
    kind = np.concatenate([np.zeros(n_lab, dtype=np.int8), np.ones(len(shares), dtype=np.int8)])
    merged = np.lexsort((kind, time, user))
    rank = np.where(kind[merged] == 0, merged, -1)
    last_interval = np.maximum.accumulate(rank) if len(rank) else rank

    is_share = kind[merged] == 1
    j = last_interval[is_share]
    s_idx = merged[is_share] - n_lab
    s_user, s_time = shares.user[s_idx], shares.timestamp[s_idx]
    jj = np.maximum(j, 0)
    hit = (j >= 0) & (lab_user[jj] == s_user) & (s_time < lab_end[jj]) if n_lab else np.zeros(len(j), bool)

    n_users = len(shares.user_ids)
    sign = lab_sign[jj[hit]] if n_lab else np.zeros(0, dtype=np.int8)
    cr = np.bincount(s_user[hit][sign > 0], minlength=n_users)
    cl = np.bincount(s_user[hit][sign < 0], minlength=n_users)
    scored = np.flatnonzero(cr + cl > 0)
    ids = [shares.user_ids[c] for c in scored.tolist()]
    by_id = sorted(range(len(ids)), key=ids.__getitem__)
    scored = scored[by_id]
    return ValenceTable([ids[i] for i in by_id], cr[scored].astype(np.int64), cl[scored].astype(np.int64))


def ideology_valence(
    shares: ShareTable | Sequence[ShareEvent], intervals: LabelTable | Sequence[LabelInterval]
) -> dict[str, IvScore]:
    """Ideology valence ``(#CR - #CL) / (#CR + #CL)`` for every labelled sharer."""
    return valence_table(shares, intervals).scores()
