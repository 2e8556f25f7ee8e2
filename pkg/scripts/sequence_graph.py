"""
sequence_graph.py

The factor-graph sequence model realized as a tick-indexed trellis. A state of the
trellis is "element e ends exactly at tick t", so every accepted path has the
imposed total duration (the finite-state automaton of the model) and the note
count is free. Binary factors multiply the Markov transition with pluggable
tick factors (harmonic synchronization, theme bias); pins fix the element that
occupies a tick interval.

Forward filtering gives the exact partition function Z; backward sampling draws
sequences with probability weight / Z.

Usage:
    from scripts.sequence_graph import melody_trellis, forward, sample, evaluate
"""

from dataclasses import dataclass, field
from functools import reduce
from math import gcd
from typing import Callable, Protocol

import numpy as np
from scipy.special import logsumexp

from scripts.errors import InfeasibleModelError, ValidationError
from scripts.notation import ChordEvent, Melody, chord_at, sort_key
from scripts.style_model import MarkovTable, StyleModel, harmonic_bin

NEG_INF = -np.inf

# -------------------- Factors & Pins --------------------


class TickFactor(Protocol):
    """
    A log-space factor over the chain's element vocabulary. start() scores the first
    element (onset 0); step(onset) scores an element placed at onset after its
    predecessor, either as a vector over elements or a predecessor x element matrix.
    """

    def start(self) -> np.ndarray | None: ...

    def step(self, onset: int) -> np.ndarray | None: ...


@dataclass(frozen=True)
class Pin:
    """Element required to occupy exactly the ticks [start, end)."""
    start: int
    end: int
    element: object


@dataclass(frozen=True)
class ScoredSequence:
    elements: tuple
    log_weight: float
    log_prob: float
    factor_logs: dict = field(default_factory=dict)

    @property
    def melody(self) -> Melody:
        return Melody(tuple(self.elements))


@dataclass(frozen=True, eq=False)
class ForwardTable:
    alpha: np.ndarray
    log_z: float


class HarmonicFactor:
    """log p_pi(e | t): melody element under the chord sounding at its onset."""

    def __init__(self, model: StyleModel, chords, elements):
        self.model = model
        self.chords = tuple(chords)
        self.bins = np.array([harmonic_bin(e) for e in elements], dtype=np.int64)
        self._cache = {}

    def start(self) -> np.ndarray:
        return self.step(0)

    def step(self, onset: int) -> np.ndarray:
        symbol = chord_at(self.chords, onset).symbol
        if symbol not in self._cache:
            with np.errstate(divide="ignore"):
                self._cache[symbol] = np.log(self.model.harmonic_for(symbol)[self.bins])
        return self._cache[symbol]


@dataclass(frozen=True)
class Unary:
    """Multiplies weight into every element placed at an onset where predicate(onset, element) holds."""
    predicate: Callable[[int, object], bool]
    weight: float

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValidationError(f"Unary weight must be nonnegative, got {self.weight}")


class UnaryFactor:
    """Product of unary weights as a log vector over the element vocabulary."""

    def __init__(self, unary, elements):
        self.unary = tuple(unary)
        self.elements = tuple(elements)
        self._cache = {}

    def start(self) -> np.ndarray:
        return self.step(0)

    def step(self, onset: int) -> np.ndarray:
        if onset not in self._cache:
            out = np.zeros(len(self.elements))
            with np.errstate(divide="ignore"):
                for u in self.unary:
                    hits = np.array([bool(u.predicate(onset, e)) for e in self.elements])
                    out[hits] += np.log(u.weight)
            self._cache[onset] = out
        return self._cache[onset]


def note_count_weight(weight: float) -> Unary:
    """Weight per placed element; above 1 favours sequences with more, shorter elements."""
    return Unary(lambda onset, element: True, weight)


# -------------------- Trellis --------------------


def _pad(array: np.ndarray, size: int) -> np.ndarray:
    """Pads a factor to the extended element vocabulary with neutral (log 1) entries."""
    if array.shape[-1] == size:
        return array
    if array.ndim == 1:
        return np.concatenate([array, np.zeros(size - array.shape[0])])
    out = np.zeros((size, size))
    out[:array.shape[0], :array.shape[1]] = array
    return out


class Trellis:
    """
    Time-indexed factor graph over a Markov chain.

    Args:
        chain (MarkovTable): The stylistic Markov model.
        total_ticks (int): Imposed total duration.
        factors (dict): Named tick factors multiplied into every transition.
        pins (list[Pin]): Non-overlapping hard constraints.
        barriers (iterable[int]): Ticks no element may straddle.
        condition_on_pins (bool): Treat pinned elements as given context: their tick
            factors are 1, elements outside the vocabulary are admitted, and free
            elements after an absorbing or foreign pinned element restart from the
            initial distribution. A free element followed by a pinned element of the
            vocabulary still pays the Markov transition into it. Requires order 1.
        local_norm (str | None): Name of a factor to renormalize per transition row.
        unary (list[Unary]): Position-dependent weights on single elements.
    """

    def __init__(self, chain: MarkovTable, total_ticks: int, factors: dict | None = None,
                 pins=(), barriers=(), condition_on_pins: bool = False, local_norm: str | None = None,
                 unary=()):
        if total_ticks < 1:
            raise ValueError(f"total_ticks must be positive, got {total_ticks}")
        if condition_on_pins and chain.order != 1:
            raise ValueError("Conditioning on pins requires a Markov order of 1")
        self.chain = chain
        self.total_ticks = total_ticks
        self.factors = dict(factors or {})
        if unary:
            self.factors["unary"] = UnaryFactor(unary, chain.element_vocab)
        self.condition_on_pins = condition_on_pins
        self.local_norm = local_norm
        self.pins = self._check_pins(pins)

        base = list(chain.states)
        extras = []
        if condition_on_pins:
            known = set(chain.element_vocab)
            extras = sorted({p.element for p in self.pins if p.element not in known}, key=sort_key)
        self.states = tuple(base + [(e,) for e in extras])
        self.elements = tuple(s[-1] for s in self.states)
        self.durations = np.array([e.ticks for e in self.elements], dtype=np.int64)
        self.element_count = len(chain.element_vocab) + len(extras)
        self.element_index = np.concatenate([chain.state_element, len(chain.element_vocab) + np.arange(len(extras))]).astype(np.int64)
        self.is_extra = np.zeros(len(self.states), dtype=bool)
        self.is_extra[len(base):] = True

        size = len(self.states)
        with np.errstate(divide="ignore"):
            log_t = np.full((size, size), NEG_INF)
            log_t[:len(base), :len(base)] = np.log(chain.transitions)
            log_i = np.full(size, NEG_INF)
            log_i[:len(base)] = np.log(chain.initial)
        if condition_on_pins:
            restart = np.nonzero(np.concatenate([chain.absorbing, np.ones(len(extras), dtype=bool)]))[0]
            log_t[restart, :] = log_i[None, :]
        self.log_transitions = log_t
        self.log_initial = log_i

        self._pin_of_tick = np.full(total_ticks, -1, dtype=np.int64)
        for k, pin in enumerate(self.pins):
            self._pin_of_tick[pin.start:pin.end] = k
        self._pin_ends = {pin.end for pin in self.pins}
        self._pin_states = [
            np.array([i for i, e in enumerate(self.elements) if e == pin.element], dtype=np.int64)
            for pin in self.pins
        ]
        self._barrier = np.zeros(total_ticks + 1, dtype=bool)
        for b in barriers:
            if 0 < b < total_ticks:
                self._barrier[b] = True
        self._step_cache = {}
        self._norm_cache = {}

    def _check_pins(self, pins) -> tuple[Pin, ...]:
        pins = tuple(sorted(pins, key=lambda p: p.start))
        for pin in pins:
            if not 0 <= pin.start < pin.end <= self.total_ticks:
                raise ValidationError(f"Pin [{pin.start}, {pin.end}) outside [0, {self.total_ticks}]")
            if pin.end - pin.start != pin.element.ticks:
                raise ValidationError(f"Pin [{pin.start}, {pin.end}) does not match duration of {pin.element}")
        for left, right in zip(pins, pins[1:]):
            if right.start < left.end:
                raise ValidationError(f"Pins [{left.start}, {left.end}) and [{right.start}, {right.end}) overlap")
        return pins

    # -------------------- Factor Assembly --------------------

    def _expanded(self, array: np.ndarray) -> np.ndarray:
        array = _pad(np.asarray(array, dtype=float), self.element_count)
        if array.ndim == 1:
            return array[self.element_index][None, :]
        return array[np.ix_(self.element_index, self.element_index)]

    def _assemble(self, onset: int, names) -> np.ndarray:
        if onset == 0:
            out = self.log_initial.copy()
            for name in names:
                vector = self.factors[name].start()
                if vector is not None:
                    out = out + _pad(np.asarray(vector, dtype=float), self.element_count)[self.element_index]
            return out
        out = self.log_transitions.copy()
        for name in names:
            matrix = self.factors[name].step(onset)
            if matrix is not None:
                out = out + self._expanded(matrix)
        return out

    def renorm_term(self, onset: int):
        """Per-row log correction that keeps a locally renormalized factor's row mass."""
        if self.local_norm not in self.factors:
            return 0.0 if onset == 0 else np.zeros(len(self.states))
        if onset not in self._norm_cache:
            others = [n for n in self.factors if n != self.local_norm]
            without = self._assemble(onset, others)
            with_all = self._assemble(onset, list(self.factors))
            with np.errstate(divide="ignore", invalid="ignore"):
                term = logsumexp(without, axis=-1) - logsumexp(with_all, axis=-1)
            self._norm_cache[onset] = np.where(np.isfinite(term), term, 0.0)
        return self._norm_cache[onset]

    def log_start(self) -> np.ndarray:
        """Log factor of each state as the first element (onset 0)."""
        if 0 not in self._step_cache:
            self._step_cache[0] = self._assemble(0, list(self.factors)) + self.renorm_term(0)
        return self._step_cache[0]

    def log_step(self, onset: int) -> np.ndarray:
        """Log binary factor (predecessor state x state) for an element placed at onset > 0."""
        if onset not in self._step_cache:
            step = self._assemble(onset, list(self.factors))
            self._step_cache[onset] = step + self.renorm_term(onset)[:, None]
        return self._step_cache[onset]

    def log_entry(self, onset: int, states) -> np.ndarray:
        """
        Log weight (predecessor state x state) of entering given pinned states at
        onset > 0. A pinned predecessor is given too, so only the edge from a free
        element into a pinned vocabulary element carries weight.
        """
        states = np.asarray(states, dtype=np.int64)
        out = np.zeros((len(self.states), len(states)))
        if onset in self._pin_ends:
            return out
        known = ~self.is_extra[states]
        out[:, known] = self.log_transitions[:, states[known]]
        return out

    # -------------------- Admissibility --------------------

    def admissible(self, onset: int, end: int, states) -> tuple[np.ndarray, bool]:
        """
        Which of `states` may occupy [onset, end), and whether that interval is
        exactly a pin handled as given context.
        """
        states = np.asarray(states, dtype=np.int64)
        if self._barrier[onset + 1:end].any():
            return np.zeros(len(states), dtype=bool), False
        owners = self._pin_of_tick[onset:end]
        if (owners >= 0).any():
            k = owners[0]
            pin = self.pins[k] if k >= 0 else None
            if pin is None or pin.start != onset or pin.end != end or (owners != k).any():
                return np.zeros(len(states), dtype=bool), False
            return np.isin(states, self._pin_states[k]), self.condition_on_pins
        return ~self.is_extra[states], False


# -------------------- Inference --------------------

def forward(trellis: Trellis) -> ForwardTable:
    """
    Sum-product forward pass in log space. alpha[t, s] is the log total weight of
    all partial paths whose last element is state s and ends exactly at tick t.

    Raises:
        InfeasibleModelError: If no path reaches total_ticks (Z = 0).
    """
    total, size = trellis.total_ticks, len(trellis.states)
    alpha = np.full((total + 1, size), NEG_INF)
    groups = {int(d): np.nonzero(trellis.durations == d)[0] for d in np.unique(trellis.durations)}
    # every element boundary lies on this grid
    grid = reduce(gcd, [*groups, total, *(p.start for p in trellis.pins)])

    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(grid, total + 1, grid):
            for d, idx in groups.items():
                u = t - d
                if u < 0:
                    continue
                mask, given = trellis.admissible(u, t, idx)
                if not mask.any():
                    continue
                if u == 0:
                    values = np.zeros(len(idx)) if given else trellis.log_start()[idx]
                else:
                    previous = alpha[u]
                    if not np.isfinite(previous).any():
                        continue
                    if given:
                        values = logsumexp(previous[:, None] + trellis.log_entry(u, idx), axis=0)
                    else:
                        values = logsumexp(previous[:, None] + trellis.log_step(u)[:, idx], axis=0)
                alpha[t, idx] = np.where(mask, values, NEG_INF)
        log_z = float(logsumexp(alpha[total]))

    if not np.isfinite(log_z):
        reachable = [t for t in range(total + 1) if t == 0 or np.isfinite(alpha[t]).any()]
        frontier = max(reachable)
        blocked = [p for p in trellis.pins if not np.isfinite(alpha[p.end]).any()]
        detail = f"; first unreachable pin ends at tick {blocked[0].end}" if blocked else ""
        raise InfeasibleModelError(
            f"No sequence of {total} ticks satisfies the model; frontier empties after tick {frontier}{detail}",
            frontier,
        )
    return ForwardTable(alpha, log_z)


def _draw(rng: np.random.Generator, log_weights: np.ndarray) -> int:
    finite = np.isfinite(log_weights)
    weights = np.zeros(len(log_weights))
    weights[finite] = np.exp(log_weights[finite] - log_weights[finite].max())
    return int(rng.choice(len(weights), p=weights / weights.sum()))


def _sample_states(trellis: Trellis, table: ForwardTable, rng: np.random.Generator) -> list[int]:
    t = trellis.total_ticks
    s = _draw(rng, table.alpha[t])
    path = [s]
    while True:
        u = t - int(trellis.durations[s])
        if u == 0:
            break
        _, given = trellis.admissible(u, t, [s])
        step = trellis.log_entry(u, [s])[:, 0] if given else trellis.log_step(u)[:, s]
        weights = table.alpha[u] + step
        s = _draw(rng, weights)
        path.append(s)
        t = u
    return path[::-1]


def sample(trellis: Trellis, rng_seed: int, count: int, table: ForwardTable | None = None) -> list[ScoredSequence]:
    """
    Draws `count` sequences by backward sampling from the forward table. Draw i uses
    its own generator seeded with (rng_seed, i), so results are reproducible per
    index and draws can be distributed across workers.

    Raises:
        InfeasibleModelError: If the model admits no sequence.
    """
    table = table or forward(trellis)
    out = []
    for i in range(count):
        rng = np.random.default_rng([rng_seed, i])
        states = _sample_states(trellis, table, rng)
        out.append(_score_states(trellis, states, table.log_z))
    return out


def _factor_value(factor, onset: int, prev_element: int | None, element: int) -> float:
    values = factor.start() if onset == 0 else factor.step(onset)
    if values is None:
        return 0.0
    values = np.asarray(values)
    if values.ndim == 1:
        return float(values[element]) if element < values.shape[0] else 0.0
    if prev_element < values.shape[0] and element < values.shape[1]:
        return float(values[prev_element, element])
    return 0.0


def _score_states(trellis: Trellis, states, log_z: float) -> ScoredSequence:
    log_weight = 0.0
    factor_logs = {name: 0.0 for name in trellis.factors}
    if trellis.local_norm in trellis.factors:
        factor_logs["renorm"] = 0.0
    onset, prev = 0, None
    for s in states:
        end = onset + int(trellis.durations[s])
        mask, given = trellis.admissible(onset, end, [s]) if end <= trellis.total_ticks else (np.array([False]), False)
        if not mask[0]:
            log_weight = NEG_INF
            break
        if given:
            if prev is not None:
                log_weight += float(trellis.log_entry(onset, [s])[prev, 0])
        else:
            log_weight += float(trellis.log_start()[s] if prev is None else trellis.log_step(onset)[prev, s])
            e_prev = None if prev is None else int(trellis.element_index[prev])
            for name, factor in trellis.factors.items():
                factor_logs[name] += _factor_value(factor, onset, e_prev, int(trellis.element_index[s]))
            if "renorm" in factor_logs:
                term = trellis.renorm_term(onset)
                factor_logs["renorm"] += float(term if prev is None else term[prev])
        onset, prev = end, s
    elements = tuple(trellis.elements[s] for s in states)
    return ScoredSequence(elements, log_weight, log_weight - log_z, factor_logs)


def evaluate(trellis: Trellis, elements, table: ForwardTable | None = None) -> ScoredSequence:
    """
    Scores a given sequence: log_weight is the sum of log factors along the path
    (-inf if any factor is 0 or a pin is violated) and log_prob = log_weight - log Z.

    Raises:
        ValueError: If the element durations do not sum to total_ticks.
    """
    elements = tuple(elements)
    total = sum(e.ticks for e in elements)
    if total != trellis.total_ticks:
        raise ValueError(f"Sequence lasts {total} ticks, trellis expects {trellis.total_ticks}")
    table = table or forward(trellis)

    states = trellis.chain.state_path(elements)
    if trellis.condition_on_pins:
        extra = {trellis.elements[i]: i for i in np.nonzero(trellis.is_extra)[0]}
        states = [s if s is not None else extra.get(e) for s, e in zip(states, elements)]
    if any(s is None for s in states):
        factor_logs = {name: NEG_INF for name in trellis.factors}
        return ScoredSequence(elements, NEG_INF, NEG_INF, factor_logs)
    return _score_states(trellis, states, table.log_z)


# -------------------- Model Trellises --------------------

def melody_trellis(model: StyleModel, chords, bias=None, pins=(), barriers=(),
                   condition_on_pins: bool = False, renorm: str = "global", unary=()) -> Trellis:
    """Melody voice: Markov notes x harmonic synchronization with a fixed chord track."""
    chords = tuple(chords)
    factors = {"temporal": HarmonicFactor(model, chords, model.notes.element_vocab)}
    if bias is not None:
        factors["bias"] = bias
    return Trellis(
        model.notes, sum(c.ticks for c in chords), factors, pins, barriers,
        condition_on_pins, local_norm="bias" if renorm == "local" else None, unary=unary,
    )


def chord_trellis(model: StyleModel, total_ticks: int, bias=None, pins=(), barriers=(),
                  condition_on_pins: bool = False, renorm: str = "global", unary=()) -> Trellis:
    """Chord voice: Markov chords with an imposed total duration."""
    factors = {} if bias is None else {"bias": bias}
    return Trellis(
        model.chords, total_ticks, factors, pins, barriers,
        condition_on_pins, local_norm="bias" if renorm == "local" else None, unary=unary,
    )


def sample_melody(model: StyleModel, chords, seed: int, count: int) -> list[ScoredSequence]:
    return sample(melody_trellis(model, chords), seed, count)


def sample_chords(model: StyleModel, total_ticks: int, seed: int, count: int) -> list[ScoredSequence]:
    return sample(chord_trellis(model, total_ticks), seed, count)


def as_chords(sequence: ScoredSequence) -> tuple[ChordEvent, ...]:
    return tuple(sequence.elements)
