import os

import pytest

from scripts.corpus_builder import DIATONIC, gen_corpus
from scripts.errors import CorpusSpecError
from scripts.notation import Note, dump_lead_sheet, load_corpus, load_lead_sheet, parse_lead_sheet


def test_single_whole_note(tmp_path):
    paths = gen_corpus(songs=1, bars=1, pitches="C4", durations="96", seed=0, out_dir=str(tmp_path))
    assert [os.path.basename(p) for p in paths] == ["song_01.json"]
    sheet = load_lead_sheet(paths[0])
    assert sheet.melody.notes == (Note(60, 96),)
    assert sheet.total_ticks == 96


def test_same_seed_gives_identical_files(tmp_path):
    kwargs = dict(songs=3, bars=4, pitches="C4,E4,G4,rest", durations="24,48", seed=5)
    first = gen_corpus(out_dir=str(tmp_path / "a"), **kwargs)
    second = gen_corpus(out_dir=str(tmp_path / "b"), **kwargs)
    for a, b in zip(first, second):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()


def test_rejects_unfillable_or_empty_sets(tmp_path):
    with pytest.raises(CorpusSpecError):
        gen_corpus(songs=1, bars=1, pitches="C4", durations="36", seed=0, out_dir=str(tmp_path))
    with pytest.raises(CorpusSpecError):
        gen_corpus(songs=1, bars=1, pitches="", durations="24", seed=0, out_dir=str(tmp_path))
    with pytest.raises(CorpusSpecError):
        gen_corpus(songs=1, bars=1, pitches="C4,H9", durations="24", seed=0, out_dir=str(tmp_path))


def test_three_four_time(tmp_path):
    paths = gen_corpus(songs=2, bars=3, pitches="C4,D4", durations="24", seed=1, beats_per_bar=3,
                       out_dir=str(tmp_path))
    for path in paths:
        sheet = load_lead_sheet(path)
        assert sheet.bar_count == 3
        assert all(n.ticks == 24 for n in sheet.melody)


def test_synthetic_corpus_shape(synthetic_corpus):
    assert len(synthetic_corpus) == 29
    for sheet in synthetic_corpus:
        assert sheet.bar_count == 12
        assert {c.symbol for c in sheet.chords} <= set(DIATONIC)
        # no note crosses a bar line
        onset = 0
        for note in sheet.melody:
            assert onset // 96 == (onset + note.ticks - 1) // 96
            onset += note.ticks
    # odd-index songs open with a half-bar chord
    assert synthetic_corpus[1].chords[0].ticks == 48


def test_corpus_loads_in_file_order(tmp_path):
    gen_corpus(songs=3, bars=1, pitches="C4,D4", durations="48", seed=2, out_dir=str(tmp_path))
    titles = [sheet.title for sheet in load_corpus(str(tmp_path))]
    assert titles == ["Synthetic song 01", "Synthetic song 02", "Synthetic song 03"]


def test_corpus_files_round_trip_byte_for_byte(tmp_path):
    paths = gen_corpus(songs=29, bars=12, pitches="C4,D4,E4,F4,G4,A4,B4,C5,rest", durations="24,48",
                       seed=7, out_dir=str(tmp_path))
    assert len(paths) == 29
    for path in paths:
        with open(path, encoding="utf-8", newline="") as f:
            text = f.read()
        assert dump_lead_sheet(parse_lead_sheet(text, path)) == text
