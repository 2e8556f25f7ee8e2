import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import pytest

from scripts.corpus_builder import gen_corpus
from scripts.notation import ChordEvent, LeadSheet, Melody, Note, load_corpus
from scripts.style_model import train

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
PLANS = os.path.join(ROOT, "plans")
THEMES = os.path.join(ROOT, "data", "themes")

C_MAJ7 = ChordEvent(0, "maj7", 96)
G7 = ChordEvent(7, "dom7", 96)


def make_sheet(title, chords, notes, beats_per_bar=4, pickup_ticks=0) -> LeadSheet:
    return LeadSheet(
        title=title,
        beats_per_bar=beats_per_bar,
        chords=tuple(chords),
        melody=Melody(tuple(Note(p, t) for p, t in notes)),
        pickup_ticks=pickup_ticks,
    )


@pytest.fixture
def toy_corpus():
    return [
        make_sheet("a", [C_MAJ7], [(60, 24), (62, 24), (64, 48)]),
        make_sheet("b", [G7], [(62, 24), (64, 24), (60, 48)]),
        make_sheet("c", [C_MAJ7, G7], [(64, 48), (62, 24), (60, 24), (62, 48), (67, 48)]),
    ]


@pytest.fixture
def toy_model(toy_corpus):
    return train(toy_corpus)


@pytest.fixture
def toy_theme(toy_corpus):
    return toy_corpus[0]


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("corpus")
    gen_corpus(songs=29, bars=12, pitches="C4,D4,E4,F4,G4,A4,B4,C5,rest",
               durations="24,48", seed=7, out_dir=str(out_dir))
    return load_corpus(str(out_dir))


@pytest.fixture(scope="session")
def synthetic_model(synthetic_corpus):
    return train(synthetic_corpus)
