import math

import pandas as pd
import pytest

from scripts.experiment import RECORD_COLUMNS, crossover_distance, run_experiment
from scripts.notation import slice_lead_sheet
from export.plot_data import export_experiment


def test_crossover_distance():
    assert crossover_distance([0, 10, 20], [5, 0, -5]) == pytest.approx(10.0)
    assert math.isnan(crossover_distance([3, 3, 3], [1, 2, 3]))
    assert math.isnan(crossover_distance([1], [1]))


def test_toy_run(toy_model, toy_theme):
    records, summary = run_experiment(toy_model, toy_theme, alphas=[0.0, 1.0], n=30, seed=1, progress=False)
    assert list(records.columns) == RECORD_COLUMNS
    assert len(records) == 60
    assert list(summary["alpha"]) == [0.0, 1.0]
    assert (summary["n"] == 30).all()
    assert (summary["identity_max_error"] <= 1e-9).all()
    neutral = records[records["alpha"] == 1.0]
    assert neutral["log_ratio"].abs().max() <= 1e-9
    assert (neutral["log_bias_product"] == 0.0).all()


def test_run_is_deterministic(toy_model, toy_theme):
    first, _ = run_experiment(toy_model, toy_theme, alphas=[0.5], n=20, seed=3, progress=False)
    again, _ = run_experiment(toy_model, toy_theme, alphas=[0.5], n=20, seed=3, progress=False)
    pd.testing.assert_frame_equal(first, again)


def test_export_writes_csv_and_plot(tmp_path, toy_model, toy_theme):
    records, summary = run_experiment(toy_model, toy_theme, alphas=[0.0, 0.5], n=10, seed=0, progress=False)
    paths = export_experiment(records, summary, str(tmp_path / "out"))
    with open(paths["records"], encoding="utf-8") as f:
        assert f.readline().strip() == ",".join(RECORD_COLUMNS)
    assert len(pd.read_csv(paths["summary"])) == 2
    with open(paths["plot"], encoding="utf-8") as f:
        script = f.read()
    assert "records.csv" in script
    assert "alpha=0.5" in script


@pytest.fixture(scope="module")
def four_bar_summary(synthetic_corpus, synthetic_model):
    theme = slice_lead_sheet(synthetic_corpus[0], 1, 4)
    _, summary = run_experiment(synthetic_model, theme, alphas=[0.0, 0.5, 0.95], n=1000, seed=42, progress=False)
    return summary.set_index("alpha")


def test_similar_variations_are_favoured(four_bar_summary):
    corr = four_bar_summary["corr_log_ratio_ms_distance"]
    assert corr[0.0] <= -0.5
    assert min(corr[0.0], corr[0.95]) < corr[0.5] < max(corr[0.0], corr[0.95])
    assert (four_bar_summary["identity_max_error"] <= 1e-9).all()


def test_weak_bias_leaves_probabilities_almost_unchanged(four_bar_summary):
    median = four_bar_summary["median_abs_log_ratio"]
    assert median[0.95] <= 0.1 * median[0.0]


def test_bias_product_tracks_localized_sum(four_bar_summary):
    assert abs(four_bar_summary.loc[0.0, "corr_log_bias_sum_localized"]) >= 0.99


def test_localized_sum_approximates_global_distance(four_bar_summary):
    assert four_bar_summary.loc[0.0, "corr_sum_localized_ms_distance"] >= 0.8
