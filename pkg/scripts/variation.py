"""
variation.py

Bias engine for generating variations of a theme. Localized Mongeau & Sankoff
distances between candidate note pairs and the theme are turned into temporal
biases

    beta(n | t, n') = exp(1 - (MGD([n', n], t) - MGD([n'], t)) / MGD_max)

blended with the strength parameter alpha as beta' = (1 - alpha) * beta + alpha.
The trellis multiplies in beta' divided by its largest value (1 - alpha) * e + alpha,
so a candidate matching the theme locally keeps its probability and every other
candidate loses some. Without that division each placed element would gain a
constant factor and sequences would be rewarded for their note count; with it the
log bias product of a sequence at alpha = 0 is exactly minus its summed localized
distance over MGD_max. The same machinery varies chord sequences, with a distance
derived from the scalar product of chord pitch histograms.

Usage:
    from scripts.variation import build_bias, variate_melody, variate_chords
"""

from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from scripts import config
from scripts.errors import ValidationError
from scripts.notation import (
    QUALITY_INTERVALS, ChordEvent, LeadSheet, Melody, onsets_of,
)
from scripts.sequence_graph import (
    Trellis, chord_trellis, evaluate, forward, melody_trellis, note_count_weight, sample,
)
from scripts.similarity import WeightParams, localized_mgd, one_note_mgd
from scripts.style_model import MarkovTable, StyleModel

# -------------------- Bias Table --------------------


def reachable_ticks(durations, total_ticks: int) -> np.ndarray:
    """reach[t] is True when some sequence of the given durations ends exactly at t."""
    reach = np.zeros(total_ticks + 1, dtype=bool)
    reach[0] = True
    steps = sorted(set(int(d) for d in durations))
    for t in range(1, total_ticks + 1):
        reach[t] = any(d <= t and reach[t - d] for d in steps)
    return reach


def element_support(chain: MarkovTable) -> np.ndarray:
    """Element pairs (e', e) that some observed state transition emits."""
    size = len(chain.element_vocab)
    support = np.zeros((size, size), dtype=bool)
    src, dst = np.nonzero(chain.transitions)
    support[chain.state_element[src], chain.state_element[dst]] = True
    return support


@dataclass(eq=False)
class BiasTable:
    """
    Blended temporal biases over an element vocabulary for a theme spanning
    [offset, offset + span) of the generated piece.

    start_delta[e] is the localized distance of e opening the span; step_delta[t]
    holds the incremental distances (e' -> e at local tick t), NaN where the pair
    was not enumerated.
    """
    elements: tuple
    alpha: float
    mgd_max: float
    span: int
    start_delta: np.ndarray
    step_delta: dict
    offset: int = 0

    def __post_init__(self):
        self._index = {e: i for i, e in enumerate(self.elements)}
        self._start_log = np.log(self._blend(self.start_delta))
        self._step_log = {t: np.log(self._blend(m)) for t, m in self.step_delta.items()}
        # log of the largest blended bias, reached by a zero localized distance
        self.log_ceiling = float(np.log((1.0 - self.alpha) * np.e + self.alpha))
        self._start_factor = self._start_log - self.log_ceiling
        self._step_factor = {t: m - self.log_ceiling for t, m in self._step_log.items()}

    def raw_beta(self, delta) -> np.ndarray:
        """beta = exp(1 - clamp(delta) / mgd_max); non-enumerated entries stay NaN."""
        delta = np.asarray(delta, dtype=float)
        scale = self.mgd_max if self.mgd_max > 0 else 1.0
        clamped = np.clip(delta, 0.0, max(self.mgd_max, 0.0))
        return np.exp(1.0 - clamped / scale)

    def _blend(self, delta) -> np.ndarray:
        blended = (1.0 - self.alpha) * self.raw_beta(delta) + self.alpha
        return np.where(np.isnan(blended), 1.0, blended)

    def beta(self, element, onset: int, previous=None) -> float:
        """Blended bias beta'(element | onset, previous); 1 outside the theme span."""
        e = self._index.get(element)
        local = onset - self.offset
        if e is None or not 0 <= local < self.span:
            return 1.0
        if local == 0:
            return float(np.exp(self._start_log[e]))
        p = self._index.get(previous)
        if p is None or local not in self._step_log:
            return 1.0
        return float(np.exp(self._step_log[local][p, e]))

    @property
    def entries(self) -> dict:
        """(element, onset, previous) -> beta' for every enumerated triple."""
        out = {}
        for e, delta in enumerate(self.start_delta):
            if not np.isnan(delta):
                out[(self.elements[e], self.offset, None)] = float(np.exp(self._start_log[e]))
        for t, matrix in self.step_delta.items():
            for p, e in zip(*np.nonzero(~np.isnan(matrix))):
                out[(self.elements[e], self.offset + t, self.elements[p])] = float(np.exp(self._step_log[t][p, e]))
        return out

    # TickFactor protocol: beta' / ((1 - alpha) * e + alpha), in log space
    def start(self) -> np.ndarray | None:
        return self._start_factor if self.offset == 0 else None

    def step(self, onset: int) -> np.ndarray | None:
        local = onset - self.offset
        if local == 0:
            return self._start_factor
        return self._step_factor.get(local)

    def localized_sum(self, elements) -> float:
        """
        Sum of the clamped localized distances that the biases of a sequence were
        built from. A pair that was not enumerated counts as MGD_max, matching its
        bias of 1.
        """
        ceiling = max(self.mgd_max, 0.0)
        total = 0.0
        previous = None
        for onset, element in zip(onsets_of(elements), elements):
            local = onset - self.offset
            e = self._index.get(element)
            p = self._index.get(previous)
            if e is not None and 0 <= local < self.span:
                value = None
                if local == 0:
                    value = self.start_delta[e]
                elif p is not None and local in self.step_delta:
                    value = self.step_delta[local][p, e]
                if value is not None:
                    total += ceiling if np.isnan(value) else float(np.clip(value, 0.0, ceiling))
            previous = element
        return total


def _build_table(vocab, span: int, alpha: float, support, offset: int,
                 start_fn, pair_fn, progress: bool) -> BiasTable:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    vocab = tuple(vocab)
    size = len(vocab)
    durations = np.array([e.ticks for e in vocab], dtype=np.int64)
    if support is None:
        support = np.ones((size, size), dtype=bool)
    reach = reachable_ticks(durations, span)

    start_delta = np.full(size, np.nan)
    for e, element in enumerate(vocab):
        if durations[e] <= span:
            start_delta[e] = start_fn(element)

    step_delta = {}
    ticks = [t for t in range(1, span) if reach[t]]
    for t in tqdm(ticks, desc="Building bias table", disable=not progress):
        matrix = np.full((size, size), np.nan)
        for p, previous in enumerate(vocab):
            if durations[p] > t or not reach[t - durations[p]]:
                continue
            fits = support[p] & (durations + t <= span)
            if not fits.any():
                continue
            base = None
            for e in np.nonzero(fits)[0]:
                delta, base = pair_fn(previous, vocab[e], t, base)
                matrix[p, e] = delta
        if not np.isnan(matrix).all():
            step_delta[t] = matrix

    enumerated = [start_delta[~np.isnan(start_delta)]] + [m[~np.isnan(m)] for m in step_delta.values()]
    values = np.concatenate(enumerated) if enumerated else np.zeros(0)
    mgd_max = float(values.max()) if values.size else 0.0
    return BiasTable(vocab, float(alpha), mgd_max, span, start_delta, step_delta, offset)


def build_bias(theme: Melody, vocab, total_ticks: int, params: WeightParams = WeightParams(),
               alpha: float = 0.0, support=None, offset: int = 0, progress: bool = False) -> BiasTable:
    """
    Computes the blended bias of every candidate (n', n, t) reachable on the tick grid.

    Args:
        theme (Melody): The theme; must last total_ticks.
        vocab: Note vocabulary, in the order of the chain's element vocabulary.
        total_ticks (int): Span the biases cover.
        params (WeightParams): Similarity weights.
        alpha (float): Bias strength blend in [0, 1]; 1 disables the bias.
        support (np.ndarray): Optional (E x E) mask of pairs worth enumerating.
        offset (int): Tick at which the theme span starts in the generated piece.

    Raises:
        ValueError: If alpha is outside [0, 1].
        ValidationError: If the theme duration differs from total_ticks.
    """
    if theme.total_ticks != total_ticks:
        raise ValidationError(f"Theme lasts {theme.total_ticks} ticks, expected {total_ticks}")

    def start_fn(note):
        return localized_mgd(theme, None, note, 0, params)

    def pair_fn(previous, note, t, base):
        if base is None:
            base = one_note_mgd(theme, previous, t, params)
        return localized_mgd(theme, previous, note, t, params) - base, base

    return _build_table(vocab, total_ticks, alpha, support, offset, start_fn, pair_fn, progress)


# -------------------- Chord Similarity --------------------

def chord_similarity(c1: ChordEvent, c2: ChordEvent, model: StyleModel) -> float:
    """Scalar product of the two chords' pitch histograms."""
    for chord in (c1, c2):
        if chord.quality not in QUALITY_INTERVALS:
            raise ValueError(f"Unknown chord quality '{chord.quality}'")
    return float(np.dot(model.histogram_for(c1.symbol), model.histogram_for(c2.symbol)))


def max_chord_similarity(model: StyleModel, chords=()) -> float:
    symbols = {c.symbol for c in model.chords.element_vocab} | {c.symbol for c in chords}
    vectors = [model.histogram_for(s) for s in sorted(symbols)]
    return float(max(np.dot(u, v) for u in vectors for v in vectors))


def _window_chord_distance(theme_chords, chord: ChordEvent, start: int, model: StyleModel, max_sim: float) -> float:
    """Per-quarter-note distance of `chord` placed at [start, start + d) against the theme."""
    end = start + chord.ticks
    total = 0.0
    covered = 0
    for onset, theme_chord in zip(onsets_of(theme_chords), theme_chords):
        overlap = min(end, onset + theme_chord.ticks) - max(start, onset)
        if overlap > 0:
            covered += overlap
            total += overlap * (max_sim - chord_similarity(chord, theme_chord, model))
    total += (chord.ticks - covered) * max_sim
    return total / config.TICKS_PER_QUARTER


def chord_distance(chords, theme_chords, model: StyleModel, max_sim: float | None = None) -> float:
    """Global chord-sequence distance: summed per-quarter dissimilarity over aligned ticks."""
    chords, theme_chords = tuple(chords), tuple(theme_chords)
    max_sim = max_chord_similarity(model, theme_chords) if max_sim is None else max_sim
    return sum(
        _window_chord_distance(theme_chords, chord, onset, model, max_sim)
        for onset, chord in zip(onsets_of(chords), chords)
    )


def build_chord_bias(theme_chords, model: StyleModel, alpha: float = 0.0, support=None,
                     offset: int = 0, progress: bool = False) -> BiasTable:
    """
    Chord counterpart of build_bias. The distance is additive over ticks, so the
    increment of a pair (c', c) is the distance of c alone over its own window.
    """
    theme_chords = tuple(theme_chords)
    span = sum(c.ticks for c in theme_chords)
    max_sim = max_chord_similarity(model, theme_chords)

    def start_fn(chord):
        return _window_chord_distance(theme_chords, chord, 0, model, max_sim)

    def pair_fn(previous, chord, t, base):
        return _window_chord_distance(theme_chords, chord, t, model, max_sim), base

    return _build_table(model.chords.element_vocab, span, alpha, support, offset, start_fn, pair_fn, progress)


# -------------------- Variation Sampling --------------------


@dataclass(frozen=True)
class Variation:
    """A sampled sequence with its probabilities under the biased and unbiased models."""
    elements: tuple
    log_prob_biased: float
    log_prob_original: float
    log_bias: float
    sum_localized: float

    @property
    def log_ratio(self) -> float:
        return self.log_prob_biased - self.log_prob_original

    @property
    def melody(self) -> Melody:
        return Melody(tuple(self.elements))


class VariationSampler:
    """Pairs a biased trellis with its unbiased twin and samples from the former."""

    def __init__(self, biased: Trellis, unbiased: Trellis, bias: BiasTable):
        self.biased = biased
        self.unbiased = unbiased
        self.bias = bias
        self.biased_table = forward(biased)
        self.unbiased_table = forward(unbiased)

    @property
    def log_z_biased(self) -> float:
        return self.biased_table.log_z

    @property
    def log_z_original(self) -> float:
        return self.unbiased_table.log_z

    def sample(self, seed: int, count: int) -> list[Variation]:
        out = []
        for drawn in sample(self.biased, seed, count, self.biased_table):
            original = evaluate(self.unbiased, drawn.elements, self.unbiased_table)
            out.append(Variation(
                elements=drawn.elements,
                log_prob_biased=drawn.log_prob,
                log_prob_original=original.log_prob,
                # under local renormalization the effective bias includes the row correction
                log_bias=drawn.factor_logs.get("bias", 0.0) + drawn.factor_logs.get("renorm", 0.0),
                sum_localized=self.bias.localized_sum(drawn.elements),
            ))
        return out


def melody_sampler(model: StyleModel, chords, theme: Melody, alpha: float,
                   params: WeightParams = WeightParams(), renorm: str = config.DEFAULT_BIAS_RENORM,
                   progress: bool = False, note_weight: float = 1.0) -> VariationSampler:
    """
    Biased and unbiased melody trellises under a chord track. note_weight multiplies
    every placed note in both, so values above 1 ask for more notes than usual.
    """
    chords = tuple(chords)
    total = sum(c.ticks for c in chords)
    if theme.total_ticks != total:
        raise ValidationError(f"Theme lasts {theme.total_ticks} ticks but the chord track lasts {total}")
    bias = build_bias(
        theme, model.notes.element_vocab, total, params, alpha,
        support=element_support(model.notes), progress=progress,
    )
    unary = () if note_weight == 1.0 else (note_count_weight(note_weight),)
    return VariationSampler(
        melody_trellis(model, chords, bias=bias, renorm=renorm, unary=unary),
        melody_trellis(model, chords, unary=unary),
        bias,
    )


def variate_melody(model: StyleModel, chords, theme: Melody, alpha: float, seed: int, count: int,
                   params: WeightParams = WeightParams(),
                   renorm: str = config.DEFAULT_BIAS_RENORM, note_weight: float = 1.0) -> list[Variation]:
    """
    Samples melodic variations of a theme under a chord track.

    Returns:
        list[Variation]: Each sample with log p_b (biased) and log p_o (unbiased).

    Raises:
        InfeasibleModelError: If either model admits no sequence.
    """
    return melody_sampler(model, chords, theme, alpha, params, renorm, note_weight=note_weight).sample(seed, count)


def chord_sampler(model: StyleModel, theme_chords, alpha: float,
                  renorm: str = config.DEFAULT_BIAS_RENORM) -> VariationSampler:
    theme_chords = tuple(theme_chords)
    total = sum(c.ticks for c in theme_chords)
    bias = build_chord_bias(theme_chords, model, alpha, support=element_support(model.chords))
    return VariationSampler(
        chord_trellis(model, total, bias=bias, renorm=renorm),
        chord_trellis(model, total),
        bias,
    )


def variate_chords(model: StyleModel, theme_chords, alpha: float, seed: int, count: int,
                   renorm: str = config.DEFAULT_BIAS_RENORM) -> list[Variation]:
    """Samples variations of a chord sequence; elements are ChordEvents."""
    return chord_sampler(model, theme_chords, alpha, renorm).sample(seed, count)


def variate_lead_sheet(model: StyleModel, sheet: LeadSheet, chord_alpha: float, melody_alpha: float,
                       seed: int, count: int, params: WeightParams = WeightParams(),
                       renorm: str = config.DEFAULT_BIAS_RENORM) -> list[LeadSheet]:
    """
    Two-step variation: the chord sequence is varied first, then the melody is
    varied under each new chord sequence.
    """
    out = []
    for i, chords in enumerate(variate_chords(model, sheet.chords, chord_alpha, seed, count, renorm)):
        melody = variate_melody(model, chords.elements, sheet.melody, melody_alpha, seed + i + 1, 1, params, renorm)[0]
        out.append(LeadSheet(
            title=f"{sheet.title} (variation {i + 1})",
            beats_per_bar=sheet.beats_per_bar,
            pickup_ticks=sheet.pickup_ticks,
            chords=tuple(chords.elements),
            melody=melody.melody,
        ))
    return out
