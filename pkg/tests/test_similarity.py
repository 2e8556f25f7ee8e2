import functools
import itertools
import json

import numpy as np
import pytest

from scripts.errors import ValidationError
from scripts.notation import REST, Melody, Note, slice_melody
from scripts.similarity import (
    WeightParams, apply_edit_script, distance_value, load_pitch_table, localized_mgd, ms_distance,
    one_note_mgd, w_cons, w_del, w_frag, w_ins, w_subst,
)

ALPHABET = [Note(p, d) for p in (60, 62, REST) for d in (12, 24)]


def enumerate_distance(a, b, params) -> float:
    """Minimum weight over every edit script, by recursion over each script's first operation."""
    m, n = len(a), len(b)

    @functools.lru_cache(maxsize=None)
    def best(i, j):
        if i == m and j == n:
            return 0.0
        options = []
        if i < m and j < n:
            options.append(w_subst(a[i], b[j], params) + best(i + 1, j + 1))
        if i < m:
            options.append(w_del(a[i], params) + best(i + 1, j))
        if j < n:
            options.append(w_ins(b[j], params) + best(i, j + 1))
        for k in range(2, params.max_group + 1):
            if i + k <= m and j < n:
                options.append(w_cons(a[i:i + k], b[j], params) + best(i + k, j + 1))
            if i < m and j + k <= n:
                options.append(w_frag(a[i], b[j:j + k], params) + best(i + 1, j + k))
        return min(options)

    return best(0, 0)


def sequences(max_length):
    for length in range(max_length + 1):
        yield from itertools.product(ALPHABET, repeat=length)


def random_pairs(count, seed):
    pool = list(sequences(4))
    rng = np.random.default_rng(seed)
    for i, j in rng.integers(0, len(pool), size=(count, 2)):
        yield pool[i], pool[j]


def test_matches_enumerator_on_short_pairs():
    params = WeightParams()
    for a, b in itertools.product(list(sequences(2)), repeat=2):
        assert ms_distance(a, b, params).distance == pytest.approx(enumerate_distance(a, b, params), abs=1e-9)


@pytest.mark.parametrize("penalty", [0.0, 2.0, 8.0])
def test_matches_enumerator_on_pairs_up_to_four_notes(penalty):
    params = WeightParams(penalty_p=penalty)
    for a, b in random_pairs(10_000, seed=int(penalty)):
        assert ms_distance(a, b, params).distance == pytest.approx(enumerate_distance(a, b, params), abs=1e-9)


def test_distance_does_not_decrease_with_penalty():
    penalties = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0]
    for a, b in random_pairs(2_000, seed=5):
        values = [ms_distance(a, b, WeightParams(penalty_p=p)).distance for p in penalties]
        assert all(x <= y + 1e-9 for x, y in zip(values, values[1:]))


def test_refragmentation_is_free_without_penalty():
    a = Melody((Note(60, 48), Note(64, 96)))
    b = Melody((Note(60, 24), Note(60, 24), Note(64, 48), Note(64, 48)))
    assert ms_distance(a, b, WeightParams(penalty_p=0.0)).distance == 0.0


def test_penalty_counts_each_fragmentation():
    a = Melody((Note(60, 48), Note(64, 96)))
    b = Melody((Note(60, 24), Note(60, 24), Note(64, 48), Note(64, 48)))
    result = ms_distance(a, b, WeightParams(penalty_p=8.0))
    fragments = [op for op in result.edit_script if op.kind == "fragment"]
    assert len(fragments) == 2
    assert result.distance == 8.0 * len(fragments)


def test_consolidation_mirrors_fragmentation():
    a = Melody((Note(60, 24), Note(60, 24)))
    b = Melody((Note(60, 48),))
    result = ms_distance(a, b)
    assert result.distance == 8.0
    assert [op.kind for op in result.edit_script] == ["consolidate"]


def test_max_group_one_disables_grouping():
    a = Melody((Note(60, 48),))
    b = Melody((Note(60, 24), Note(60, 24)))
    # substitute (0 + 0.5 * 24) then insert (4 + 0.5 * 24)
    assert ms_distance(a, b, WeightParams(max_group=1)).distance == 28.0


def test_identity_and_symmetry():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = [ALPHABET[i] for i in rng.integers(0, len(ALPHABET), size=4)]
        b = [ALPHABET[i] for i in rng.integers(0, len(ALPHABET), size=3)]
        assert ms_distance(a, a).distance == 0.0
        assert ms_distance(a, b).distance == pytest.approx(ms_distance(b, a).distance)


def test_empty_melodies():
    b = Melody((Note(60, 24), Note(62, 48)))
    assert ms_distance((), ()).distance == 0.0
    assert ms_distance((), b).distance == (4 + 12) + (4 + 24)
    assert ms_distance(b, ()).distance == (4 + 12) + (4 + 24)


def test_edit_script_replays_to_target():
    a = Melody((Note(60, 24), Note(62, 24), Note(REST, 48), Note(67, 96)))
    b = Melody((Note(60, 48), Note(64, 24), Note(67, 48), Note(67, 48)))
    result = ms_distance(a, b)
    assert apply_edit_script(a, result.edit_script) == b
    assert sum(op.weight for op in result.edit_script) == pytest.approx(result.distance)


def test_apply_edit_script_rejects_gaps():
    a = Melody((Note(60, 24), Note(62, 24)))
    script = ms_distance(a, a).edit_script[1:]
    with pytest.raises(ValueError):
        apply_edit_script(a, script)


def test_group_weights_check_size():
    params = WeightParams()
    with pytest.raises(ValueError):
        w_frag(Note(60, 48), [Note(60, 48)], params)
    with pytest.raises(ValueError):
        w_cons([Note(60, 12)] * 9, Note(60, 96), params)


def test_rest_mismatch_weight():
    params = WeightParams()
    assert w_subst(Note(REST, 24), Note(60, 24), params) == params.rest_mismatch
    assert w_subst(Note(REST, 24), Note(REST, 48), params) == params.k1 * 24


def test_invalid_params():
    with pytest.raises(ValidationError):
        WeightParams(pitch_table=(0.0,) * 11)
    with pytest.raises(ValidationError):
        WeightParams(k1=-1.0)
    with pytest.raises(ValidationError):
        WeightParams(pitch_table=(1.0,) * 12)


def test_load_pitch_table(tmp_path):
    weights = [0, 5, 4, 3, 2, 1, 6, 1, 2, 3, 4, 5]
    as_list = tmp_path / "list.json"
    as_list.write_text(json.dumps(weights))
    as_dict = tmp_path / "dict.json"
    as_dict.write_text(json.dumps({str(i): w for i, w in enumerate(weights)}))
    assert load_pitch_table(str(as_list)) == tuple(float(w) for w in weights)
    assert load_pitch_table(str(as_dict)) == load_pitch_table(str(as_list))


def test_localized_distance_windows():
    theme = Melody((Note(60, 24), Note(62, 24), Note(64, 48)))
    params = WeightParams()
    assert localized_mgd(theme, None, Note(60, 24), 0, params) == 0.0
    assert localized_mgd(theme, Note(60, 24), Note(62, 24), 24, params) == 0.0
    # window [24, 96) against candidate pair 62/24, 64/48
    expected = ms_distance((Note(62, 24), Note(64, 48)), slice_melody(theme, 24, 96), params).distance
    assert localized_mgd(theme, Note(62, 24), Note(64, 48), 48, params) == expected
    assert one_note_mgd(theme, Note(62, 24), 48, params) == 0.0


def test_localized_window_is_clipped_to_theme():
    theme = Melody((Note(60, 24), Note(62, 24)))
    params = WeightParams()
    clipped = ms_distance((Note(60, 24), Note(62, 48)), theme, params).distance
    assert localized_mgd(theme, Note(60, 24), Note(62, 48), 24, params) == clipped
    # window entirely past the end: the candidate is simply deleted
    assert localized_mgd(theme, None, Note(60, 24), 48, params) == w_del(Note(60, 24), params)


def test_distance_value_matches_full_distance():
    a = (Note(60, 24), Note(64, 24))
    b = (Note(62, 48),)
    assert distance_value(a, b, WeightParams()) == ms_distance(a, b).distance
