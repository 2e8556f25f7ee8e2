from collections import Counter
from itertools import product

import numpy as np
import pytest

from scripts.errors import InfeasibleModelError, ValidationError
from scripts.notation import ChordEvent, Note
from scripts.sequence_graph import (
    Pin, Trellis, Unary, chord_trellis, evaluate, forward, melody_trellis, note_count_weight, sample,
    sample_chords, sample_melody,
)
from scripts.style_model import temporal_prob, train
from conftest import C_MAJ7, G7


def enumerate_weights(model, chords, allowed=lambda seq: True) -> dict:
    """Every note sequence filling the chord track, with its unnormalized weight."""
    chords = tuple(chords)
    total = sum(c.ticks for c in chords)
    notes = model.notes
    out = {}

    def extend(seq, onset, weight):
        if onset == total:
            if allowed(seq):
                out[tuple(seq)] = weight
            return
        for note in notes.element_vocab:
            if onset + note.ticks > total:
                continue
            j = notes.index_of((note,))
            p = notes.initial[j] if not seq else notes.transitions[notes.index_of((seq[-1],)), j]
            w = weight * p * temporal_prob(model, chords, note, onset)
            if w > 0:
                extend(seq + [note], onset + note.ticks, w)

    extend([], 0, 1.0)
    return out


def test_partition_function_matches_enumeration(toy_model):
    for chords in [(C_MAJ7,), (G7,), (C_MAJ7, G7)]:
        weights = enumerate_weights(toy_model, chords)
        table = forward(melody_trellis(toy_model, chords))
        assert table.log_z == pytest.approx(np.log(sum(weights.values())), rel=1e-9)


def test_sampling_matches_enumerated_distribution(toy_model):
    chords = (C_MAJ7,)
    weights = enumerate_weights(toy_model, chords)
    z = sum(weights.values())
    n = 20_000
    counts = Counter(s.elements for s in sample(melody_trellis(toy_model, chords), 3, n))
    assert set(counts) <= set(weights)
    tv = 0.5 * sum(abs(counts.get(seq, 0) / n - w / z) for seq, w in weights.items())
    assert tv <= 0.02


def test_sample_log_prob_matches_evaluate(toy_model):
    trellis = melody_trellis(toy_model, (C_MAJ7, G7))
    table = forward(trellis)
    for drawn in sample(trellis, 11, 25, table):
        assert sum(n.ticks for n in drawn.elements) == 192
        scored = evaluate(trellis, drawn.elements, table)
        assert scored.log_prob == pytest.approx(drawn.log_prob, abs=1e-12)
        assert set(scored.factor_logs) == {"temporal"}


def test_probabilities_sum_to_one(toy_model):
    chords = (C_MAJ7,)
    trellis = melody_trellis(toy_model, chords)
    table = forward(trellis)
    total = sum(np.exp(evaluate(trellis, seq, table).log_prob) for seq in enumerate_weights(toy_model, chords))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_sampling_is_reproducible_per_index(toy_model):
    trellis = melody_trellis(toy_model, (C_MAJ7,))
    first = [s.elements for s in sample(trellis, 5, 10)]
    again = [s.elements for s in sample(trellis, 5, 10)]
    assert first == again


def test_unseen_transition_has_zero_probability(toy_model):
    trellis = melody_trellis(toy_model, (C_MAJ7,))
    # 64/48 -> 64/24 never occurs in the corpus
    scored = evaluate(trellis, (Note(64, 48), Note(64, 24), Note(60, 24)))
    assert scored.log_prob == -np.inf


def test_evaluate_rejects_wrong_length(toy_model):
    trellis = melody_trellis(toy_model, (C_MAJ7,))
    with pytest.raises(ValueError):
        evaluate(trellis, (Note(60, 24),))


def test_impossible_duration_is_infeasible(toy_model):
    with pytest.raises(InfeasibleModelError) as info:
        forward(Trellis(toy_model.notes, 12))
    assert info.value.frontier == 0


def test_strict_pin_fixes_element(toy_model):
    chords = (C_MAJ7,)
    pin = Pin(0, 24, Note(62, 24))
    trellis = melody_trellis(toy_model, chords, pins=[pin])
    weights = enumerate_weights(toy_model, chords, allowed=lambda seq: seq[0] == Note(62, 24))
    assert forward(trellis).log_z == pytest.approx(np.log(sum(weights.values())), rel=1e-9)
    for drawn in sample(trellis, 2, 50):
        assert drawn.elements[0] == Note(62, 24)
    assert evaluate(trellis, (Note(64, 48), Note(62, 24), Note(60, 24))).log_prob == -np.inf


def test_pins_are_validated(toy_model):
    with pytest.raises(ValidationError):
        Trellis(toy_model.notes, 96, pins=[Pin(0, 48, Note(62, 24))])
    with pytest.raises(ValidationError):
        Trellis(toy_model.notes, 96, pins=[Pin(0, 48, Note(64, 48)), Pin(24, 48, Note(62, 24))])


def test_barrier_blocks_straddling_elements(toy_model):
    chords = (C_MAJ7,)
    trellis = melody_trellis(toy_model, chords, barriers=[48])

    def respects_barrier(seq):
        onset = 0
        for note in seq:
            if onset < 48 < onset + note.ticks:
                return False
            onset += note.ticks
        return True

    weights = enumerate_weights(toy_model, chords, allowed=respects_barrier)
    assert forward(trellis).log_z == pytest.approx(np.log(sum(weights.values())), rel=1e-9)


def test_conditioned_pin_admits_foreign_element(toy_model):
    foreign = Note(61, 24)
    trellis = Trellis(toy_model.notes, 96, pins=[Pin(24, 48, foreign)], condition_on_pins=True)
    drawn = sample(trellis, 0, 30)
    for seq in drawn:
        onsets = np.cumsum([0] + [n.ticks for n in seq.elements])[:-1]
        assert dict(zip(onsets, seq.elements))[24] == foreign
    scored = evaluate(trellis, drawn[0].elements)
    assert scored.log_prob == pytest.approx(drawn[0].log_prob)


def test_conditioned_mode_requires_first_order(toy_corpus):
    model = train(toy_corpus, order=2)
    with pytest.raises(ValueError):
        Trellis(model.notes, 96, condition_on_pins=True)


def test_chord_sampling_fills_duration(toy_model):
    for drawn in sample_chords(toy_model, 192, 1, 10):
        assert sum(c.ticks for c in drawn.elements) == 192
        assert all(isinstance(c, ChordEvent) for c in drawn.elements)
    assert forward(chord_trellis(toy_model, 192)).log_z == pytest.approx(np.log(2 / 3))


def test_sample_melody_follows_chords(toy_model):
    for drawn in sample_melody(toy_model, (G7,), 4, 10):
        assert drawn.melody.total_ticks == 96
        assert np.isfinite(drawn.log_prob)


def test_free_element_before_a_pinned_one_pays_the_transition(toy_model):
    pinned = Note(60, 24)
    trellis = Trellis(toy_model.notes, 96, pins=[Pin(72, 96, pinned)], condition_on_pins=True)
    table = forward(trellis)
    # only 62/24 leads to 60/24; 60/48 and 67/48 end their songs and restart
    for drawn in sample(trellis, 1, 200, table):
        assert drawn.elements[-1] == pinned
        assert drawn.elements[-2] in {Note(62, 24), Note(60, 48), Note(67, 48)}
    assert evaluate(trellis, (Note(60, 24), Note(62, 24), Note(64, 24), pinned), table).log_prob == -np.inf
    assert np.isfinite(evaluate(trellis, (Note(64, 48), Note(62, 24), pinned), table).log_prob)


def test_conditioned_probabilities_sum_to_one(toy_model):
    pinned = Note(60, 24)
    trellis = Trellis(toy_model.notes, 96, pins=[Pin(72, 96, pinned)], condition_on_pins=True)
    table = forward(trellis)
    vocab = toy_model.notes.element_vocab
    total = 0.0
    for size in (2, 3):
        for prefix in product(vocab, repeat=size):
            if sum(n.ticks for n in prefix) == 72:
                total += np.exp(evaluate(trellis, prefix + (pinned,), table).log_prob)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_note_count_weight_matches_enumeration(toy_model):
    chords = (C_MAJ7, G7)
    weights = enumerate_weights(toy_model, chords)
    trellis = melody_trellis(toy_model, chords, unary=[note_count_weight(2.0)])
    expected = sum(w * 2.0 ** len(seq) for seq, w in weights.items())
    table = forward(trellis)
    assert table.log_z == pytest.approx(np.log(expected), rel=1e-9)
    for drawn in sample(trellis, 6, 20, table):
        assert drawn.factor_logs["unary"] == pytest.approx(len(drawn.elements) * np.log(2.0))


def test_zero_unary_weight_forbids_element(toy_model):
    chords = (C_MAJ7,)
    banned = Unary(lambda onset, note: onset == 24 and note == Note(62, 24), 0.0)
    trellis = melody_trellis(toy_model, chords, unary=[banned])

    def avoids(seq):
        onsets = np.cumsum([0] + [n.ticks for n in seq])[:-1]
        return dict(zip(onsets, seq)).get(24) != Note(62, 24)

    weights = enumerate_weights(toy_model, chords, allowed=avoids)
    assert forward(trellis).log_z == pytest.approx(np.log(sum(weights.values())), rel=1e-9)
    assert all(avoids(drawn.elements) for drawn in sample(trellis, 8, 100))


def test_unary_weight_must_be_nonnegative():
    with pytest.raises(ValidationError):
        Unary(lambda onset, note: True, -1.0)
