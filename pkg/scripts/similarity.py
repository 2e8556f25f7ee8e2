"""
similarity.py

Mongeau & Sankoff melodic edit distance with fragmentation and consolidation,
extended with a penalty p on both operations so that splitting a long note into
repeated shorter ones of the same pitch is no longer free. Also provides the
localized variant used to bias the generative model towards a theme.

Usage:
    from scripts.similarity import WeightParams, ms_distance, localized_mgd
"""

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from scripts import config
from scripts.errors import ValidationError
from scripts.notation import Melody, Note, slice_melody

# -------------------- Parameters --------------------


@dataclass(frozen=True)
class WeightParams:
    """All weight constants of the distance. Hashable so results can be cached."""
    k1: float = config.DEFAULT_K1
    penalty_p: float = config.DEFAULT_PENALTY_P
    pitch_table: tuple[float, ...] = field(default=config.DEFAULT_PITCH_TABLE)
    rest_mismatch: float = config.DEFAULT_REST_MISMATCH
    k_del: float = config.DEFAULT_K_DEL
    k_ins: float = config.DEFAULT_K_INS
    max_group: int = config.DEFAULT_MAX_GROUP

    def __post_init__(self):
        object.__setattr__(self, "pitch_table", tuple(float(w) for w in self.pitch_table))
        if len(self.pitch_table) != 12:
            raise ValidationError(f"pitch_table needs 12 interval-class weights, got {len(self.pitch_table)}")
        if self.pitch_table[0] != 0:
            raise ValidationError("pitch_table[0] must be 0 (unison costs nothing)")
        weights = (self.k1, self.penalty_p, self.rest_mismatch, self.k_del, self.k_ins, *self.pitch_table)
        if any(w < 0 for w in weights):
            raise ValidationError("All similarity weights must be nonnegative")
        if self.max_group < 1:
            raise ValidationError(f"max_group must be positive, got {self.max_group}")


def load_pitch_table(path: str) -> tuple[float, ...]:
    """
    Reads a pitch table from JSON: either a list of 12 weights or a mapping
    from interval class ("0".."11") to weight.
    """
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if isinstance(data, dict):
        try:
            data = [data[str(i)] for i in range(12)]
        except KeyError as e:
            raise ValidationError(f"{path}: pitch table is missing interval class {e}") from e
    if not isinstance(data, list) or len(data) != 12:
        raise ValidationError(f"{path}: pitch table must hold 12 weights")
    return tuple(float(w) for w in data)


# -------------------- Local Weights --------------------

def w_pitch(a: Note, b: Note, params: WeightParams) -> float:
    """Interval-class pitch weight; rests match only rests."""
    if a.is_rest and b.is_rest:
        return 0.0
    if a.is_rest or b.is_rest:
        return params.rest_mismatch
    return params.pitch_table[abs(a.pitch - b.pitch) % 12]


def w_len(a: Note, b: Note) -> float:
    return float(abs(a.ticks - b.ticks))


def w_subst(a: Note, b: Note, params: WeightParams) -> float:
    return w_pitch(a, b, params) + params.k1 * w_len(a, b)


def w_del(a: Note, params: WeightParams) -> float:
    return params.k_del + params.k1 * a.ticks


def w_ins(b: Note, params: WeightParams) -> float:
    return params.k_ins + params.k1 * b.ticks


def _check_group(notes, params: WeightParams) -> None:
    if not 2 <= len(notes) <= params.max_group:
        raise ValueError(f"Group size {len(notes)} outside [2, {params.max_group}]")


def w_frag(a: Note, bs, params: WeightParams) -> float:
    """
    Weight of replacing note a by the shorter notes bs: summed pitch weights,
    length difference against the total length of bs, plus the penalty p.
    """
    bs = tuple(bs)
    _check_group(bs, params)
    pitch = sum(w_pitch(a, b, params) for b in bs)
    length = abs(a.ticks - sum(b.ticks for b in bs))
    return pitch + params.k1 * length + params.penalty_p


def w_cons(as_, b: Note, params: WeightParams) -> float:
    """Mirror image of w_frag: the notes as_ are merged into the single note b."""
    as_ = tuple(as_)
    _check_group(as_, params)
    pitch = sum(w_pitch(a, b, params) for a in as_)
    length = abs(sum(a.ticks for a in as_) - b.ticks)
    return pitch + params.k1 * length + params.penalty_p


# -------------------- Edit Scripts --------------------


@dataclass(frozen=True)
class EditOp:
    """
    One step of an edit script. Spans are 0-based half-open index ranges into
    A and B; `produced` holds the notes of B this step emits.
    """
    kind: str
    a_span: tuple[int, int]
    b_span: tuple[int, int]
    weight: float
    produced: tuple[Note, ...] = ()


@dataclass(frozen=True)
class DistanceResult:
    distance: float
    edit_script: tuple[EditOp, ...]


def apply_edit_script(a, script) -> Melody:
    """
    Replays an edit script against melody A and returns the melody it produces.

    Raises:
        ValueError: If the script does not consume A left to right exactly once.
    """
    a = tuple(a)
    position = 0
    out = []
    for op in script:
        start, end = op.a_span
        if start != position or end > len(a):
            raise ValueError(f"Edit op {op.kind} at {op.a_span} does not continue from index {position}")
        position = end
        out.extend(op.produced)
    if position != len(a):
        raise ValueError(f"Edit script consumed {position} of {len(a)} notes")
    return Melody(tuple(out))


# -------------------- Dynamic Programming --------------------

_SUBST, _CONS, _FRAG, _DEL, _INS = range(5)


def _fill_table(a: tuple[Note, ...], b: tuple[Note, ...], params: WeightParams):
    """
    Fills the (m+1) x (n+1) recurrence table. Ties break in the order
    substitute, consolidate, fragment, delete, insert.
    """
    m, n = len(a), len(b)
    delta = np.zeros((m + 1, n + 1))
    back_kind = np.full((m + 1, n + 1), -1, dtype=np.int8)
    back_k = np.ones((m + 1, n + 1), dtype=np.int32)
    k1, p, g = params.k1, params.penalty_p, params.max_group

    for i in range(1, m + 1):
        delta[i, 0] = delta[i - 1, 0] + w_del(a[i - 1], params)
        back_kind[i, 0] = _DEL
    for j in range(1, n + 1):
        delta[0, j] = delta[0, j - 1] + w_ins(b[j - 1], params)
        back_kind[0, j] = _INS

    for i in range(1, m + 1):
        ai = a[i - 1]
        for j in range(1, n + 1):
            bj = b[j - 1]
            best = delta[i - 1, j - 1] + w_subst(ai, bj, params)
            kind, best_k = _SUBST, 1

            # consolidation a[i-k..i-1] -> b[j-1], grown one note at a time
            pitch, ticks = w_pitch(ai, bj, params), ai.ticks
            for k in range(2, min(g, i) + 1):
                prev = a[i - k]
                pitch += w_pitch(prev, bj, params)
                ticks += prev.ticks
                value = delta[i - k, j - 1] + pitch + k1 * abs(ticks - bj.ticks) + p
                if value < best:
                    best, kind, best_k = value, _CONS, k

            # fragmentation a[i-1] -> b[j-k..j-1]
            pitch, ticks = w_pitch(ai, bj, params), bj.ticks
            for k in range(2, min(g, j) + 1):
                prev = b[j - k]
                pitch += w_pitch(ai, prev, params)
                ticks += prev.ticks
                value = delta[i - 1, j - k] + pitch + k1 * abs(ai.ticks - ticks) + p
                if value < best:
                    best, kind, best_k = value, _FRAG, k

            value = delta[i - 1, j] + w_del(ai, params)
            if value < best:
                best, kind, best_k = value, _DEL, 1
            value = delta[i, j - 1] + w_ins(bj, params)
            if value < best:
                best, kind, best_k = value, _INS, 1

            delta[i, j] = best
            back_kind[i, j] = kind
            back_k[i, j] = best_k

    return delta, back_kind, back_k


def _traceback(a, b, back_kind, back_k, params: WeightParams) -> tuple[EditOp, ...]:
    ops = []
    i, j = len(a), len(b)
    while i > 0 or j > 0:
        kind, k = back_kind[i, j], int(back_k[i, j])
        if kind == _SUBST:
            ops.append(EditOp("substitute", (i - 1, i), (j - 1, j), w_subst(a[i - 1], b[j - 1], params), (b[j - 1],)))
            i, j = i - 1, j - 1
        elif kind == _CONS:
            ops.append(EditOp("consolidate", (i - k, i), (j - 1, j), w_cons(a[i - k:i], b[j - 1], params), (b[j - 1],)))
            i, j = i - k, j - 1
        elif kind == _FRAG:
            ops.append(EditOp("fragment", (i - 1, i), (j - k, j), w_frag(a[i - 1], b[j - k:j], params), tuple(b[j - k:j])))
            i, j = i - 1, j - k
        elif kind == _DEL:
            ops.append(EditOp("delete", (i - 1, i), (j, j), w_del(a[i - 1], params)))
            i -= 1
        else:
            ops.append(EditOp("insert", (i, i), (j - 1, j), w_ins(b[j - 1], params), (b[j - 1],)))
            j -= 1
    return tuple(reversed(ops))


def ms_distance(a, b, params: WeightParams = WeightParams()) -> DistanceResult:
    """
    Computes the modified Mongeau & Sankoff distance between two melodies and an
    optimal edit script. Either melody may be empty.

    Args:
        a (Melody): The source melody A.
        b (Melody): The target melody B.
        params (WeightParams): Weight constants.

    Returns:
        DistanceResult: delta(m, n) and the script that transforms A into B.
    """
    a, b = tuple(a), tuple(b)
    delta, back_kind, back_k = _fill_table(a, b, params)
    return DistanceResult(float(delta[len(a), len(b)]), _traceback(a, b, back_kind, back_k, params))


@lru_cache(maxsize=200_000)
def distance_value(a: tuple[Note, ...], b: tuple[Note, ...], params: WeightParams) -> float:
    """Distance only, memoized; the bias engine evaluates many identical windows."""
    delta, _, _ = _fill_table(a, b, params)
    return float(delta[len(a), len(b)])


# -------------------- Localized Distance --------------------

def _theme_window(theme: Melody, start: int, end: int) -> tuple[Note, ...]:
    total = theme.total_ticks
    start, end = max(0, min(start, total)), max(0, min(end, total))
    if start >= end:
        return ()
    return slice_melody(theme, start, end).notes


def localized_mgd(theme: Melody, prev: Note | None, cand: Note, t: int,
                  params: WeightParams = WeightParams()) -> float:
    """
    Distance between the candidate pair [prev, cand] (cand starting at tick t) and
    the theme fragment it would replace, [t - d(prev), t + d(cand)] clipped to
    the theme. Without a predecessor only [cand] and [t, t + d(cand)] are compared.
    """
    if prev is None:
        return distance_value((cand,), _theme_window(theme, t, t + cand.ticks), params)
    window = _theme_window(theme, t - prev.ticks, t + cand.ticks)
    return distance_value((prev, cand), window, params)


def one_note_mgd(theme: Melody, prev: Note, t: int, params: WeightParams = WeightParams()) -> float:
    """MGD([prev], t): prev compared with the theme over [t - d(prev), t]."""
    return distance_value((prev,), _theme_window(theme, t - prev.ticks, t), params)
