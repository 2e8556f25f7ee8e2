import os

import pandas as pd

# -------------------- Experiment Export --------------------

PLOT_SCRIPT = """\
# gnuplot script for {records}
set datafile separator ","
set key outside
set terminal pngcairo size 900,600

set output "log_ratio_vs_distance.png"
set xlabel "Mongeau & Sankoff distance to the theme"
set ylabel "log(p_b / p_o)"
plot {series_ratio}

set output "log_bias_vs_localized.png"
set xlabel "sum of localized distances"
set ylabel "log of the bias product"
plot {series_bias}

set output "localized_vs_distance.png"
set xlabel "Mongeau & Sankoff distance to the theme"
set ylabel "sum of localized distances"
plot {series_localized}
"""


def _series(records_file: str, alphas, x: int, y: int) -> str:
    # columns: seed,alpha,ms_distance,log_ratio,sum_localized,log_bias_product
    return ", \\\n     ".join(
        f"\"{records_file}\" using (${2} == {alpha!r} ? ${x} : 1/0):{y} skip 1 with points pt 7 ps 0.4 title \"alpha={alpha}\""
        for alpha in alphas
    )


def write_plot_script(records_file: str, alphas, out_path: str) -> None:
    """Writes a gnuplot script drawing the three experiment scatter plots from records_file."""
    name = os.path.basename(records_file)
    alphas = [float(a) for a in alphas]
    script = PLOT_SCRIPT.format(
        records=name,
        series_ratio=_series(name, alphas, 3, 4),
        series_bias=_series(name, alphas, 5, 6),
        series_localized=_series(name, alphas, 3, 5),
    )
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(script)


def export_experiment(records: pd.DataFrame, summary: pd.DataFrame, out_dir: str) -> dict:
    """
    Writes records.csv, summary.csv and plot.gp into out_dir.

    Returns:
        dict: Paths of the written files keyed by kind.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "records": os.path.join(out_dir, "records.csv"),
        "summary": os.path.join(out_dir, "summary.csv"),
        "plot": os.path.join(out_dir, "plot.gp"),
    }
    records.to_csv(paths["records"], index=False, lineterminator="\n")
    summary.to_csv(paths["summary"], index=False, lineterminator="\n")
    write_plot_script(paths["records"], sorted(records["alpha"].unique()), paths["plot"])
    print(f"✅ Exported {len(records)} records for {records['alpha'].nunique()} alpha value(s) to {out_dir}")
    return paths
