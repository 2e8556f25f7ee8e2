import numpy as np
import pytest

from scripts.errors import ValidationError
from scripts.notation import Melody, Note
from scripts.sequence_graph import evaluate
from scripts.similarity import WeightParams, localized_mgd
from scripts.style_model import train
from scripts.variation import (
    build_bias, chord_distance, chord_sampler, chord_similarity, element_support, melody_sampler,
    reachable_ticks, variate_chords, variate_lead_sheet, variate_melody,
)
from conftest import C_MAJ7, G7, make_sheet


def test_reachable_ticks():
    reach = reachable_ticks([24, 48], 96)
    assert reach[0] and reach[24] and reach[72] and reach[96]
    assert not reach[12] and not reach[30]


def test_theme_opening_gets_full_bias(toy_model, toy_theme):
    bias = build_bias(toy_theme.melody, toy_model.notes.element_vocab, 96, alpha=0.0)
    assert bias.beta(Note(60, 24), 0) == pytest.approx(np.e)
    assert bias.mgd_max > 0
    # the least similar enumerated candidate is scaled down to exp(0)
    values = bias.entries.values()
    assert min(values) == pytest.approx(1.0)
    assert max(values) == pytest.approx(np.e)


def test_bias_blend_with_alpha(toy_model, toy_theme):
    vocab = toy_model.notes.element_vocab
    raw = build_bias(toy_theme.melody, vocab, 96, alpha=0.0)
    blended = build_bias(toy_theme.melody, vocab, 96, alpha=0.4)
    for key, beta in raw.entries.items():
        assert blended.entries[key] == pytest.approx(0.6 * beta + 0.4)
    neutral = build_bias(toy_theme.melody, vocab, 96, alpha=1.0)
    assert all(v == pytest.approx(1.0) for v in neutral.entries.values())


def test_bias_uses_incremental_distance(toy_model, toy_theme):
    params = WeightParams()
    bias = build_bias(toy_theme.melody, toy_model.notes.element_vocab, 96, params, alpha=0.0)
    prev, cand = Note(60, 24), Note(64, 48)
    delta = localized_mgd(toy_theme.melody, prev, cand, 24, params) - localized_mgd(
        toy_theme.melody, None, prev, 0, params)
    expected = np.exp(1 - np.clip(delta, 0, bias.mgd_max) / bias.mgd_max)
    assert bias.beta(cand, 24, prev) == pytest.approx(expected)


def test_bias_outside_span_is_neutral(toy_model, toy_theme):
    bias = build_bias(toy_theme.melody, toy_model.notes.element_vocab, 96, alpha=0.0, offset=96)
    assert bias.start() is None
    assert bias.beta(Note(60, 24), 0) == 1.0
    assert bias.beta(Note(60, 24), 96) == pytest.approx(np.e)


def test_bias_rejects_bad_inputs(toy_model, toy_theme):
    vocab = toy_model.notes.element_vocab
    with pytest.raises(ValueError):
        build_bias(toy_theme.melody, vocab, 96, alpha=1.5)
    with pytest.raises(ValidationError):
        build_bias(toy_theme.melody, vocab, 192, alpha=0.0)


def test_neutral_alpha_leaves_model_unchanged(toy_model, toy_theme):
    for v in variate_melody(toy_model, toy_theme.chords, toy_theme.melody, 1.0, seed=1, count=100):
        assert abs(v.log_prob_biased - v.log_prob_original) <= 1e-9


@pytest.mark.parametrize("renorm", ["global", "local"])
def test_ratio_equals_bias_product_over_partition_ratio(toy_model, toy_theme, renorm):
    sampler = melody_sampler(toy_model, toy_theme.chords, toy_theme.melody, 0.0, renorm=renorm)
    gap = sampler.log_z_biased - sampler.log_z_original
    for v in sampler.sample(seed=9, count=50):
        assert v.log_ratio == pytest.approx(v.log_bias - gap, abs=1e-9)


def test_theme_collects_the_largest_bias_everywhere(toy_model, toy_theme):
    sampler = melody_sampler(toy_model, toy_theme.chords, toy_theme.melody, 0.0)
    scored = evaluate(sampler.biased, toy_theme.melody.notes, sampler.biased_table)
    # every element reproduces the theme locally, so each applied factor is 1
    assert scored.factor_logs["bias"] == pytest.approx(0.0, abs=1e-12)
    assert sampler.bias.localized_sum(toy_theme.melody.notes) == 0.0


def test_theme_length_must_match(toy_model, toy_theme):
    with pytest.raises(ValidationError):
        variate_melody(toy_model, (C_MAJ7, G7), toy_theme.melody, 0.0, seed=0, count=1)


def test_chord_distance():
    model = train([make_sheet("x", [C_MAJ7, G7], [(60, 96), (67, 96)])])
    assert chord_similarity(C_MAJ7, G7, model) == 2.0
    assert chord_distance((C_MAJ7, G7), (C_MAJ7, G7), model) == 0.0
    # two shared tones out of four over four quarter notes
    assert chord_distance((G7,), (C_MAJ7,), model) == pytest.approx(8.0)


def test_chord_variations(toy_model):
    theme = (C_MAJ7, G7)
    variations = variate_chords(toy_model, theme, 0.0, seed=2, count=5)
    assert all(sum(c.ticks for c in v.elements) == 192 for v in variations)
    sampler = chord_sampler(toy_model, theme, 1.0)
    assert sampler.log_z_biased == pytest.approx(sampler.log_z_original)


def test_two_step_variation(toy_model, toy_corpus):
    sheet = toy_corpus[2]
    out = variate_lead_sheet(toy_model, sheet, chord_alpha=0.0, melody_alpha=0.5, seed=3, count=3)
    assert len(out) == 3
    for varied in out:
        assert varied.total_ticks == sheet.total_ticks
        assert varied.beats_per_bar == sheet.beats_per_bar


def test_element_support_follows_transitions(toy_model):
    support = element_support(toy_model.notes)
    vocab = toy_model.notes.element_vocab
    assert support[vocab.index(Note(60, 24)), vocab.index(Note(62, 24))]
    assert not support[vocab.index(Note(64, 48)), vocab.index(Note(64, 24))]


def test_variation_samples_are_reproducible(toy_model, toy_theme):
    first = variate_melody(toy_model, toy_theme.chords, toy_theme.melody, 0.5, seed=4, count=10)
    again = variate_melody(toy_model, toy_theme.chords, toy_theme.melody, 0.5, seed=4, count=10)
    assert [v.elements for v in first] == [v.elements for v in again]
    assert all(isinstance(v.melody, Melody) for v in first)


def test_applied_factor_peaks_at_one(toy_model, toy_theme):
    vocab = toy_model.notes.element_vocab
    for alpha in (0.0, 0.5):
        bias = build_bias(toy_theme.melody, vocab, 96, alpha=alpha)
        factors = np.concatenate([bias.start()] + [bias.step(t).ravel() for t in (24, 48, 72)])
        assert factors.max() == pytest.approx(0.0, abs=1e-12)
        assert factors.min() >= -np.log((1 - alpha) * np.e + alpha) - 1e-12


def test_bias_product_is_affine_in_localized_sum(toy_model, toy_theme):
    sampler = melody_sampler(toy_model, toy_theme.chords, toy_theme.melody, 0.0)
    for v in sampler.sample(seed=12, count=60):
        assert v.log_bias == pytest.approx(-v.sum_localized / sampler.bias.mgd_max, abs=1e-9)


def test_note_weight_asks_for_more_notes(toy_model, toy_theme):
    chords, theme = toy_theme.chords, toy_theme.melody
    plain = variate_melody(toy_model, chords, theme, 0.5, seed=3, count=300)
    busy = variate_melody(toy_model, chords, theme, 0.5, seed=3, count=300, note_weight=4.0)
    assert np.mean([len(v.elements) for v in busy]) > np.mean([len(v.elements) for v in plain])
    sampler = melody_sampler(toy_model, chords, theme, 0.5, note_weight=4.0)
    gap = sampler.log_z_biased - sampler.log_z_original
    for v in busy:
        assert v.log_ratio == pytest.approx(v.log_bias - gap, abs=1e-9)
