import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import functools

import click

from scripts import config
from scripts.corpus_builder import gen_corpus
from scripts.errors import InfeasibleModelError, VariataError
from scripts.experiment import run_experiment
from scripts.notation import (
    LeadSheet, chord_symbol, load_corpus, load_lead_sheet, save_lead_sheet, slice_lead_sheet,
)
from scripts.sequence_graph import sample_chords, sample_melody
from scripts.similarity import WeightParams, load_pitch_table, ms_distance
from scripts.structure import audit, execute, load_plan, resolve
from scripts.style_model import load_model, save_model, train
from scripts.variation import variate_chords, variate_lead_sheet, variate_melody
from export.plan_graph import export_plan_graph
from export.plot_data import export_experiment

EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3

# -------------------- Shared Options --------------------

def weight_options(command):
    """Similarity weight flags shared by every command that measures distances."""
    options = [
        click.option("--k1", type=float, default=config.DEFAULT_K1, show_default=True,
                     help="Weight of duration differences."),
        click.option("--penalty-p", type=float, default=config.DEFAULT_PENALTY_P, show_default=True,
                     help="Penalty added to every fragmentation and consolidation."),
        click.option("--pitch-table", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="JSON file with the 12 interval-class pitch weights."),
        click.option("--max-group", type=int, default=config.DEFAULT_MAX_GROUP, show_default=True,
                     help="Largest group in a fragmentation or consolidation."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def seed_option(command):
    return click.option("--seed", type=int, default=config.DEFAULT_SEED, show_default=True,
                        help="Random seed; identical inputs and seed give identical outputs.")(command)


def renorm_option(command):
    return click.option("--bias-renorm", type=click.Choice(config.BIAS_RENORM_CHOICES),
                        default=config.DEFAULT_BIAS_RENORM, show_default=True,
                        help="Renormalize the biased model globally (through Z) or per transition.")(command)


def make_params(k1, penalty_p, pitch_table, max_group) -> WeightParams:
    table = load_pitch_table(pitch_table) if pitch_table else config.DEFAULT_PITCH_TABLE
    return WeightParams(k1=k1, penalty_p=penalty_p, pitch_table=table, max_group=max_group)


def handle_errors(command):
    """Maps library errors to exit codes: 2 for bad input, 3 for infeasible models."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except InfeasibleModelError as e:
            click.echo(f"❌ Infeasible: {e}", err=True)
            sys.exit(EXIT_INFEASIBLE)
        except (VariataError, ValueError) as e:
            click.echo(f"❌ {e}", err=True)
            sys.exit(EXIT_VALIDATION)
    return wrapper


def load_theme(path: str, bars: int | None) -> LeadSheet:
    sheet = load_lead_sheet(path)
    return slice_lead_sheet(sheet, 1, bars) if bars else sheet


# -------------------- CLI Setup --------------------

@click.group(help="Variations and structured lead sheets from a corpus-trained Markov model.")
def cli():
    pass


# -------------------- Model Commands --------------------

@cli.command(name="train", help="Train a style model from a directory of lead sheets.")
@click.option("--corpus", type=click.Path(exists=True, file_okay=False), default=config.CORPUS_DIR,
              show_default=True, help="Directory of corpus JSON files.")
@click.option("--out", default="model.json", show_default=True, help="Output model file.")
@click.option("--order", type=int, default=config.DEFAULT_ORDER, show_default=True, help="Markov order.")
@handle_errors
def train_cmd(corpus, out, order):
    sheets = load_corpus(corpus)
    model = train(sheets, order)
    save_model(model, out)
    click.echo(f"✅ Trained order-{order} model on {len(sheets)} lead sheet(s): "
               f"{model.notes.size} note states, {model.chords.size} chord states -> {out}")


@cli.command(help="Sample lead sheets from the unbiased model.")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True, help="Trained model file.")
@click.option("--theme", type=click.Path(exists=True), required=True,
              help="Lead sheet giving the chord track and length.")
@click.option("--bars", type=int, default=None, help="Use only the first N bars of the lead sheet.")
@click.option("--free-chords", is_flag=True, help="Sample a new chord track as well.")
@click.option("--count", type=int, default=1, show_default=True, help="Number of lead sheets.")
@click.option("--out-dir", default="out/samples", show_default=True, help="Output directory.")
@seed_option
@handle_errors
def sample(model_path, theme, bars, free_chords, count, out_dir, seed):
    model = load_model(model_path)
    sheet = load_theme(theme, bars)
    if free_chords:
        chord_tracks = [s.elements for s in sample_chords(model, sheet.total_ticks, seed, count)]
    else:
        chord_tracks = [sheet.chords] * count
    for i, chords in enumerate(chord_tracks):
        melody = sample_melody(model, chords, seed + i, 1)[0]
        out = LeadSheet(f"{sheet.title} (sample {i + 1})", sheet.beats_per_bar, tuple(chords),
                        melody.melody, sheet.pickup_ticks)
        save_lead_sheet(out, os.path.join(out_dir, f"sample_{i + 1:03d}.json"))
    click.echo(f"✅ Wrote {count} sample(s) to {out_dir}")


# -------------------- Variation Commands --------------------

@cli.command(help="Sample melodic variations of a theme under its own chords.")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True, help="Trained model file.")
@click.option("--theme", type=click.Path(exists=True), required=True, help="Theme lead sheet.")
@click.option("--bars", type=int, default=None, help="Use only the first N bars of the theme.")
@click.option("--alpha", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True,
              help="Bias strength; 1 means no bias.")
@click.option("--count", type=int, default=10, show_default=True, help="Number of variations.")
@click.option("--out-dir", default="out/variations", show_default=True, help="Output directory.")
@click.option("--note-weight", type=click.FloatRange(min=0.0, min_open=True), default=1.0, show_default=True,
              help="Weight per placed note; above 1 asks for more notes than usual.")
@seed_option
@weight_options
@renorm_option
@handle_errors
def variate(model_path, theme, bars, alpha, count, out_dir, note_weight, seed, k1, penalty_p, pitch_table, max_group,
            bias_renorm):
    params = make_params(k1, penalty_p, pitch_table, max_group)
    model = load_model(model_path)
    sheet = load_theme(theme, bars)
    variations = variate_melody(model, sheet.chords, sheet.melody, alpha, seed, count, params, bias_renorm,
                                note_weight=note_weight)
    for i, v in enumerate(variations):
        out = LeadSheet(f"{sheet.title} (variation {i + 1})", sheet.beats_per_bar, sheet.chords,
                        v.melody, sheet.pickup_ticks)
        save_lead_sheet(out, os.path.join(out_dir, f"variation_{i + 1:03d}.json"))
        distance = ms_distance(sheet.melody, v.melody, params).distance
        click.echo(f"  {i + 1:3d}: distance={distance:.2f} log(p_b/p_o)={v.log_ratio:.3f}")
    click.echo(f"✅ Wrote {len(variations)} variation(s) to {out_dir}")


@cli.command(name="variate-chords", help="Sample chord variations, optionally followed by melodic variations.")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True, help="Trained model file.")
@click.option("--theme", type=click.Path(exists=True), required=True, help="Theme lead sheet.")
@click.option("--bars", type=int, default=None, help="Use only the first N bars of the theme.")
@click.option("--alpha", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True,
              help="Bias strength for the chords.")
@click.option("--melody-alpha", type=click.FloatRange(0.0, 1.0), default=None,
              help="Also vary the melody under each new chord track with this strength.")
@click.option("--count", type=int, default=10, show_default=True, help="Number of variations.")
@click.option("--out-dir", default="out/chord_variations", show_default=True, help="Output directory.")
@seed_option
@weight_options
@renorm_option
@handle_errors
def variate_chords_cmd(model_path, theme, bars, alpha, melody_alpha, count, out_dir, seed,
                       k1, penalty_p, pitch_table, max_group, bias_renorm):
    params = make_params(k1, penalty_p, pitch_table, max_group)
    model = load_model(model_path)
    sheet = load_theme(theme, bars)
    if melody_alpha is not None:
        sheets = variate_lead_sheet(model, sheet, alpha, melody_alpha, seed, count, params, bias_renorm)
    else:
        sheets = [
            LeadSheet(f"{sheet.title} (chord variation {i + 1})", sheet.beats_per_bar, v.elements,
                      sheet.melody, sheet.pickup_ticks)
            for i, v in enumerate(variate_chords(model, sheet.chords, alpha, seed, count, bias_renorm))
        ]
    for i, out in enumerate(sheets):
        save_lead_sheet(out, os.path.join(out_dir, f"variation_{i + 1:03d}.json"))
        click.echo(f"  {i + 1:3d}: {' '.join(chord_symbol(c) for c in out.chords)}")
    click.echo(f"✅ Wrote {len(sheets)} variation(s) to {out_dir}")


# -------------------- Structure Commands --------------------

@cli.command(help="Generate a structured lead sheet from a plan.")
@click.option("--plan", "plan_path", type=click.Path(exists=True), required=True, help="Structure plan file.")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True, help="Trained order-1 model.")
@click.option("--out", default="out/composition.json", show_default=True, help="Output lead sheet.")
@click.option("--alpha-override", type=click.FloatRange(0.0, 1.0), default=None,
              help="Replace the alpha of every variation directive.")
@seed_option
@weight_options
@renorm_option
@handle_errors
def compose(plan_path, model_path, out, alpha_override, seed, k1, penalty_p, pitch_table, max_group, bias_renorm):
    params = make_params(k1, penalty_p, pitch_table, max_group)
    plan = load_plan(plan_path)
    model = load_model(model_path)
    for step in resolve(plan).steps:
        click.echo(f"  {step.action:12s} bars {step.bars[0]}-{step.bars[1]} ({len(step.pins)} pinned range(s))")
    sheet = execute(plan, model, seed, params, alpha_override, bias_renorm)
    save_lead_sheet(sheet, out)

    report = audit(plan, sheet, params)
    for problem in report.problems:
        click.echo(f"⚠️ {problem}")
    for index, distance in report.variation_distances.items():
        click.echo(f"🔍 {plan.directives[index].label()}: distance to source {distance:.2f}")
    click.echo(f"✅ Composed {sheet.bar_count} bars -> {out}")


@cli.command(name="export-plan-graph", help="Export a plan's dependency graph to GraphML.")
@click.option("--plan", "plan_path", type=click.Path(exists=True), required=True, help="Structure plan file.")
@click.option("--output", default="export/plan_graph.graphml", show_default=True, help="Output filepath.")
@handle_errors
def export_plan_graph_cmd(plan_path, output):
    export_plan_graph(load_plan(plan_path), output)


# -------------------- Harness Commands --------------------

@cli.command(help="Run the bias/similarity correlation experiment.")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True, help="Trained model file.")
@click.option("--theme", type=click.Path(exists=True), required=True, help="Theme lead sheet.")
@click.option("--bars", type=int, default=4, show_default=True, help="Use only the first N bars of the theme.")
@click.option("--alphas", default=",".join(str(a) for a in config.DEFAULT_ALPHAS), show_default=True,
              help="Comma-separated bias strengths.")
@click.option("--count", type=int, default=config.DEFAULT_COUNT, show_default=True, help="Samples per alpha.")
@click.option("--out-dir", default=config.EXPERIMENT_DIR, show_default=True, help="Output directory.")
@seed_option
@weight_options
@renorm_option
@handle_errors
def experiment(model_path, theme, bars, alphas, count, out_dir, seed, k1, penalty_p, pitch_table, max_group, bias_renorm):
    params = make_params(k1, penalty_p, pitch_table, max_group)
    try:
        alpha_values = [float(a) for a in alphas.split(",") if a.strip()]
    except ValueError:
        raise click.UsageError(f"--alphas must be comma-separated numbers, got '{alphas}'")
    records, summary = run_experiment(load_model(model_path), load_theme(theme, bars), alpha_values,
                                      count, seed, params, bias_renorm)
    export_experiment(records, summary, out_dir)
    click.echo("🔍 Summary:")
    for row in summary.itertuples():
        click.echo(f"  alpha={row.alpha}: corr(log ratio, distance)={row.corr_log_ratio_ms_distance:.3f} "
                   f"median |log ratio|={row.median_abs_log_ratio:.3f}")


@cli.command(name="gen-corpus", help="Generate a synthetic lead sheet corpus.")
@click.option("--songs", type=int, default=config.DEFAULT_CORPUS_SONGS, show_default=True)
@click.option("--bars", type=int, default=config.DEFAULT_CORPUS_BARS, show_default=True)
@click.option("--pitches", default=config.DEFAULT_CORPUS_PITCHES, show_default=True,
              help="Comma-separated pitch names; include 'rest' to allow rests.")
@click.option("--durations", default=config.DEFAULT_CORPUS_DURATIONS, show_default=True,
              help="Comma-separated durations in ticks (24 per quarter note).")
@click.option("--beats-per-bar", type=int, default=4, show_default=True)
@click.option("--out-dir", default=config.CORPUS_DIR, show_default=True, help="Output directory.")
@seed_option
@handle_errors
def gen_corpus_cmd(songs, bars, pitches, durations, beats_per_bar, out_dir, seed):
    paths = gen_corpus(songs, bars, pitches, durations, seed, beats_per_bar, out_dir, progress=True)
    click.echo(f"✅ Generated {len(paths)} lead sheet(s) in {out_dir}")


@cli.command(help="Mongeau & Sankoff distance between the melodies of two lead sheets.")
@click.argument("a", type=click.Path(exists=True))
@click.argument("b", type=click.Path(exists=True))
@click.option("--script", "show_script", is_flag=True, help="Print the optimal edit script.")
@weight_options
@handle_errors
def distance(a, b, show_script, k1, penalty_p, pitch_table, max_group):
    params = make_params(k1, penalty_p, pitch_table, max_group)
    result = ms_distance(load_lead_sheet(a).melody, load_lead_sheet(b).melody, params)
    click.echo(f"{result.distance:.6f}")
    if show_script:
        for op in result.edit_script:
            click.echo(f"  {op.kind:11s} A{list(op.a_span)} -> B{list(op.b_span)}  {op.weight:.3f}")


# -------------------- Entry Point --------------------

if __name__ == "__main__":
    cli()
