"""
style_model.py

Trains the statistical ingredients of the two-voice lead sheet model from a corpus:
- Markov chains over notes and over chords (order k, no smoothing)
- Initial distributions
- The harmonic model: pitch class (or rest) given the chord, counted per tick of overlap
  between the note and each chord it sounds over
- Binary chord-tone histograms used for chord similarity

Usage:
    from scripts.style_model import train, temporal_prob, save_model, load_model
"""

import json
import os
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from scripts.errors import ValidationError
from scripts.notation import (
    REST, ChordEvent, LeadSheet, Note, QUALITY_INTERVALS,
    chord_at, chord_tone_vector, onsets_of, sort_key,
)

# Harmonic bins: 12 pitch classes followed by the rest bin
REST_BIN = 12
HARMONIC_BINS = 13

# -------------------- Markov Tables --------------------

def _context(elements, position: int, order: int) -> tuple:
    """The order-k state reached after emitting elements[position]."""
    start = position - order + 1
    padding = (None,) * max(0, -start)
    return padding + tuple(elements[max(0, start):position + 1])


@dataclass(frozen=True, eq=False)
class MarkovTable:
    """
    Order-k Markov chain. Each state is the k-tuple of the latest elements, padded
    with None before the sequence start; the element a state emits is its last item.
    Rows with no observed successor are flagged absorbing and left all-zero.
    """
    order: int
    states: tuple[tuple, ...]
    transitions: np.ndarray
    initial: np.ndarray
    absorbing: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.states)})
        vocab = sorted({s[-1] for s in self.states}, key=sort_key)
        object.__setattr__(self, "element_vocab", tuple(vocab))
        element_index = {e: i for i, e in enumerate(vocab)}
        object.__setattr__(self, "_element_index", element_index)
        object.__setattr__(
            self, "state_element", np.array([element_index[s[-1]] for s in self.states], dtype=np.int64)
        )

    @property
    def size(self) -> int:
        return len(self.states)

    def index_of(self, state: tuple) -> int | None:
        return self._index.get(state)

    def element_index(self, element) -> int | None:
        return self._element_index.get(element)

    def context(self, elements, position: int) -> tuple:
        return _context(elements, position, self.order)

    def state_path(self, elements) -> list[int | None]:
        """State indices visited by an element sequence (None where unseen)."""
        elements = list(elements)
        return [self.index_of(self.context(elements, i)) for i in range(len(elements))]

    def durations(self) -> np.ndarray:
        return np.array([s[-1].ticks for s in self.states], dtype=np.int64)

    @classmethod
    def fit(cls, sequences, order: int = 1) -> "MarkovTable":
        """
        Counts transitions within each sequence (never across sequences) and
        normalizes them into a row-stochastic matrix.
        """
        if order < 1:
            raise ValueError(f"Markov order must be at least 1, got {order}")
        sequences = [list(seq) for seq in sequences if len(seq)]
        if not sequences:
            raise ValueError("Cannot fit a Markov table without any non-empty sequence")

        starts, pairs, seen = Counter(), Counter(), set()
        for seq in sequences:
            path = [_context(seq, i, order) for i in range(len(seq))]
            seen.update(path)
            starts[path[0]] += 1
            pairs.update(zip(path, path[1:]))

        states = tuple(sorted(seen, key=sort_key))
        index = {s: i for i, s in enumerate(states)}
        counts = np.zeros((len(states), len(states)))
        for (src, dst), c in pairs.items():
            counts[index[src], index[dst]] = c
        initial = np.zeros(len(states))
        for s, c in starts.items():
            initial[index[s]] = c

        row_sums = counts.sum(axis=1)
        absorbing = row_sums == 0
        transitions = np.divide(counts, row_sums[:, None], out=np.zeros_like(counts), where=~absorbing[:, None])
        return cls(order, states, transitions, initial / initial.sum(), absorbing)


# -------------------- Style Model --------------------


@dataclass(frozen=True, eq=False)
class StyleModel:
    """Trained notes and chords chains plus harmonic and chord-tone tables."""
    notes: MarkovTable
    chords: MarkovTable
    harmonic: dict
    histograms: dict

    @property
    def order(self) -> int:
        return self.notes.order

    # Field views matching the two-voice model vocabulary
    @property
    def note_states(self):
        return self.notes.states

    @property
    def note_transitions(self) -> np.ndarray:
        return self.notes.transitions

    @property
    def note_initial(self) -> np.ndarray:
        return self.notes.initial

    @property
    def chord_states(self):
        return self.chords.states

    @property
    def chord_transitions(self) -> np.ndarray:
        return self.chords.transitions

    @property
    def chord_initial(self) -> np.ndarray:
        return self.chords.initial

    def harmonic_for(self, symbol: tuple[int, str]) -> np.ndarray:
        """
        Harmonic distribution under a chord symbol. Unseen symbols borrow the
        distribution of a seen chord of the same quality, rotated to the new root;
        failing that the distribution is uniform.
        """
        if symbol in self.harmonic:
            return self.harmonic[symbol]
        root, quality = symbol
        same_quality = sorted(s for s in self.harmonic if s[1] == quality)
        if not same_quality:
            return np.full(HARMONIC_BINS, 1.0 / HARMONIC_BINS)
        base_root, _ = same_quality[0]
        base = self.harmonic[same_quality[0]]
        rotated = np.empty(HARMONIC_BINS)
        rotated[:12] = np.roll(base[:12], root - base_root)
        rotated[REST_BIN] = base[REST_BIN]
        return rotated

    def histogram_for(self, symbol: tuple[int, str]) -> np.ndarray:
        if symbol in self.histograms:
            return self.histograms[symbol]
        return np.array(chord_tone_vector(*symbol), dtype=np.int64)


def harmonic_bin(note: Note) -> int:
    return REST_BIN if note.is_rest else note.pitch % 12


def train(corpus: list[LeadSheet], order: int = 1) -> StyleModel:
    """
    Trains the style model on a corpus of lead sheets.

    Args:
        corpus (list[LeadSheet]): Training lead sheets (nonempty).
        order (int): Markov order for both chains.

    Returns:
        StyleModel: Deterministic function of the corpus and order.

    Raises:
        ValueError: If the corpus is empty.
    """
    if not corpus:
        raise ValueError("Cannot train on an empty corpus")

    notes = MarkovTable.fit([sheet.melody.notes for sheet in corpus], order)
    chords = MarkovTable.fit([sheet.chords for sheet in corpus], order)

    # Overlap-weighted pitch-class counts under each chord symbol
    counts = defaultdict(lambda: np.zeros(HARMONIC_BINS))
    for sheet in corpus:
        chord_spans = [(on, on + c.ticks, c.symbol) for on, c in zip(onsets_of(sheet.chords), sheet.chords)]
        for onset, note in zip(onsets_of(sheet.melody.notes), sheet.melody.notes):
            end = onset + note.ticks
            for c_on, c_end, symbol in chord_spans:
                overlap = min(end, c_end) - max(onset, c_on)
                if overlap > 0:
                    counts[symbol][harmonic_bin(note)] += overlap

    harmonic = {symbol: row / row.sum() for symbol, row in sorted(counts.items()) if row.sum() > 0}
    symbols = sorted({c.symbol for sheet in corpus for c in sheet.chords})
    histograms = {s: np.array(chord_tone_vector(*s), dtype=np.int64) for s in symbols}
    return StyleModel(notes, chords, harmonic, histograms)


def temporal_prob(model: StyleModel, chords, e: Note, t: int, e_prev: Note | None = None) -> float:
    """
    p_pi(e | t, e_prev): probability of placing note e under the chord sounding at
    tick t. Rests get the rest frequency under that chord. e_prev does not enter
    the harmonic model; it is part of the signature for symmetry with the bias.

    Raises:
        TickRangeError: If t is outside the chord track.
    """
    chord = chord_at(chords, t)
    return float(model.harmonic_for(chord.symbol)[harmonic_bin(e)])


# -------------------- Serialization --------------------

def _encode_element(element):
    if element is None:
        return None
    if isinstance(element, Note):
        return {"pitch": "rest" if element.is_rest else element.pitch, "ticks": element.ticks}
    return {"root": element.root, "quality": element.quality, "ticks": element.ticks}


def _decode_element(data):
    if data is None:
        return None
    if "pitch" in data:
        return Note(REST if data["pitch"] == "rest" else data["pitch"], data["ticks"])
    return ChordEvent(data["root"], data["quality"], data["ticks"])


def _encode_table(table: MarkovTable) -> dict:
    rows = []
    for i in range(table.size):
        successors = np.nonzero(table.transitions[i])[0]
        rows.append({"from": i, "to": [[int(j), float(table.transitions[i, j])] for j in successors]})
    return {
        "order": table.order,
        "states": [[_encode_element(e) for e in s] for s in table.states],
        "initial": [[int(i), float(table.initial[i])] for i in np.nonzero(table.initial)[0]],
        "transitions": rows,
    }


def _decode_table(data: dict) -> MarkovTable:
    states = tuple(tuple(_decode_element(e) for e in s) for s in data["states"])
    size = len(states)
    transitions = np.zeros((size, size))
    for row in data["transitions"]:
        for j, p in row["to"]:
            transitions[row["from"], j] = p
    initial = np.zeros(size)
    for i, p in data["initial"]:
        initial[i] = p
    return MarkovTable(data["order"], states, transitions, initial, transitions.sum(axis=1) == 0)


def dump_model(model: StyleModel) -> str:
    """Canonical JSON text: identical models give identical bytes."""
    payload = {
        "notes": _encode_table(model.notes),
        "chords": _encode_table(model.chords),
        "harmonic": [
            {"root": root, "quality": quality, "bins": [float(p) for p in model.harmonic[(root, quality)]]}
            for root, quality in sorted(model.harmonic)
        ],
        "histograms": [
            {"root": root, "quality": quality, "tones": [int(v) for v in model.histograms[(root, quality)]]}
            for root, quality in sorted(model.histograms)
        ],
    }
    return json.dumps(payload, indent=1) + "\n"


def save_model(model: StyleModel, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dump_model(model))


def load_model(path: str) -> StyleModel:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    try:
        harmonic = {(h["root"], h["quality"]): np.array(h["bins"]) for h in data["harmonic"]}
        histograms = {(h["root"], h["quality"]): np.array(h["tones"], dtype=np.int64) for h in data["histograms"]}
        for root, quality in harmonic:
            if quality not in QUALITY_INTERVALS:
                raise ValidationError(f"{path}: unknown chord quality '{quality}'")
        return StyleModel(_decode_table(data["notes"]), _decode_table(data["chords"]), harmonic, histograms)
    except (KeyError, TypeError) as e:
        raise ValidationError(f"{path}: malformed model file ({e})") from e
