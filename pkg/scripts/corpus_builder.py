"""
corpus_builder.py

Generates a deterministic synthetic lead sheet corpus with controlled statistics:
a fixed pitch bigram favouring small steps, a fixed duration bigram, a preference
for chord tones, and a diatonic chord walk leaning on descending fifths. Every
bar is filled exactly, so no note or chord crosses a bar line.

Usage:
    from scripts.corpus_builder import gen_corpus
    gen_corpus(songs=29, bars=12, pitches="C4,D4,E4,rest", durations="12,24", seed=42)
"""

import os

import numpy as np
from tqdm import tqdm

from scripts import config
from scripts.errors import CorpusSpecError
from scripts.notation import REST, ChordEvent, LeadSheet, Melody, Note, parse_pitch, save_lead_sheet

# Diatonic seventh chords of C major, by scale degree
DIATONIC = (
    (0, "maj7"), (2, "min7"), (4, "min7"), (5, "maj7"),
    (7, "dom7"), (9, "min7"), (11, "m7b5"),
)

# Degree-step weights: moving down a fifth (up a fourth) is favoured
DEGREE_STEP_WEIGHTS = np.array([0.2, 1.0, 0.5, 4.0, 0.5, 1.5, 0.5])

CHORD_TONE_BOOST = 3.0
REST_WEIGHT = 0.15
SPLIT_BAR_PROB = 0.3


def _parse_set(values, parse, label: str) -> list:
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    try:
        parsed = sorted({parse(v) if isinstance(v, str) else int(v) for v in values})
    except ValueError as e:
        raise CorpusSpecError(f"Bad {label} set: {e}") from e
    if not parsed:
        raise CorpusSpecError(f"The {label} set must not be empty")
    return parsed


def _fillable(durations, length: int) -> np.ndarray:
    """fits[r] is True when r ticks can be filled exactly with the durations."""
    fits = np.zeros(length + 1, dtype=bool)
    fits[0] = True
    for r in range(1, length + 1):
        fits[r] = any(d <= r and fits[r - d] for d in durations)
    return fits


def _pitch_bigram(pitches, rng: np.random.Generator) -> np.ndarray:
    size = len(pitches)
    weights = np.empty((size, size))
    for i, a in enumerate(pitches):
        for j, b in enumerate(pitches):
            if a == REST or b == REST:
                weights[i, j] = REST_WEIGHT
            else:
                weights[i, j] = np.exp(-abs(a - b) / 3.0)
    return weights * rng.uniform(0.5, 1.5, size=(size, size))


def _draw(rng: np.random.Generator, weights) -> int:
    weights = np.asarray(weights, dtype=float)
    return int(rng.choice(len(weights), p=weights / weights.sum()))


def _chord_track(rng: np.random.Generator, bars: int, bar_ticks: int, split_first: bool) -> list[ChordEvent]:
    degree = _draw(rng, [3.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0])
    chords = []
    for bar in range(bars):
        split = bar_ticks % 2 == 0 and (rng.random() < SPLIT_BAR_PROB or (bar == 0 and split_first))
        for ticks in ([bar_ticks // 2] * 2 if split else [bar_ticks]):
            root, quality = DIATONIC[degree]
            chords.append(ChordEvent(root, quality, ticks))
            degree = (degree + _draw(rng, DEGREE_STEP_WEIGHTS)) % 7
    return chords


def _melody(rng: np.random.Generator, chords, bars: int, bar_ticks: int, pitches, durations,
            pitch_bigram, duration_bigram, fits) -> list[Note]:
    notes = []
    onset = 0
    chord_ends = np.cumsum([c.ticks for c in chords])
    p_prev, d_prev = _draw(rng, np.ones(len(pitches))), None
    for _ in range(bars):
        remaining = bar_ticks
        while remaining:
            allowed = np.array([d <= remaining and fits[remaining - d] for d in durations], dtype=float)
            weights = allowed * (duration_bigram[d_prev] if d_prev is not None else 1.0)
            d_idx = _draw(rng, weights if weights.sum() > 0 else allowed)

            chord = chords[int(np.searchsorted(chord_ends, onset, side="right"))]
            tones = chord.pitch_classes
            boost = np.array([CHORD_TONE_BOOST if p != REST and p % 12 in tones else 1.0 for p in pitches])
            p_idx = _draw(rng, pitch_bigram[p_prev] * boost) if notes else p_prev

            notes.append(Note(pitches[p_idx], durations[d_idx]))
            p_prev, d_prev = p_idx, d_idx
            onset += durations[d_idx]
            remaining -= durations[d_idx]
    return notes


def gen_corpus(songs: int = config.DEFAULT_CORPUS_SONGS, bars: int = config.DEFAULT_CORPUS_BARS,
               pitches=config.DEFAULT_CORPUS_PITCHES, durations=config.DEFAULT_CORPUS_DURATIONS,
               seed: int = config.DEFAULT_SEED, beats_per_bar: int = 4,
               out_dir: str = config.CORPUS_DIR, progress: bool = False) -> list[str]:
    """
    Writes `songs` lead sheets named song_XX.json into out_dir.

    Args:
        songs (int): Number of lead sheets.
        bars (int): Bars per lead sheet.
        pitches: Pitch names ("C4", "rest") as a list or comma-separated string.
        durations: Durations in ticks as a list or comma-separated string.
        seed (int): Identical arguments give byte-identical files.

    Returns:
        list[str]: Paths of the written files in order.

    Raises:
        CorpusSpecError: If a set is empty or the durations cannot fill a bar.
    """
    if songs < 1 or bars < 1 or beats_per_bar < 1:
        raise CorpusSpecError("songs, bars and beats_per_bar must be positive")
    pitches = _parse_set(pitches, parse_pitch, "pitch")
    durations = _parse_set(durations, int, "duration")
    if durations[0] < 1:
        raise CorpusSpecError("Durations must be positive tick counts")

    bar_ticks = beats_per_bar * config.TICKS_PER_QUARTER
    fits = _fillable(durations, bar_ticks)
    if not fits[bar_ticks]:
        raise CorpusSpecError(f"Durations {durations} cannot fill a {bar_ticks}-tick bar exactly")

    rng = np.random.default_rng(seed)
    pitch_bigram = _pitch_bigram(pitches, rng)
    duration_bigram = rng.uniform(0.2, 1.0, size=(len(durations), len(durations)))

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i in tqdm(range(songs), desc="Generating corpus", disable=not progress):
        # every other song opens with two half-bar chords so half-bar pickups stay reachable
        chords = _chord_track(rng, bars, bar_ticks, split_first=i % 2 == 1)
        notes = _melody(rng, chords, bars, bar_ticks, pitches, durations, pitch_bigram, duration_bigram, fits)
        sheet = LeadSheet(
            title=f"Synthetic song {i + 1:02d}",
            beats_per_bar=beats_per_bar,
            chords=tuple(chords),
            melody=Melody(tuple(notes)),
        )
        path = os.path.join(out_dir, f"song_{i + 1:02d}.json")
        save_lead_sheet(sheet, path)
        paths.append(path)
    return paths
