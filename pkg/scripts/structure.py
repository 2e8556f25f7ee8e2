"""
structure.py

Structure engine: a declarative plan of bar-range directives (free material,
copies, transposed copies, variations, harmony transpositions) resolved into a
generation schedule and executed against the style model. Chords are generated
first, then the melody; material that is already determined is pinned while the
surrounding bars are generated.

Usage:
    from scripts.structure import load_plan, resolve, execute, audit
"""

import json
from dataclasses import dataclass, field
from enum import Enum

import networkx as nx
import numpy as np

from scripts import config
from scripts.errors import (
    CorpusParseError, InfeasibleModelError, PlanError, StructuralInfeasibilityError,
)
from scripts.notation import (
    LeadSheet, Melody, bar_span, onsets_of, slice_chords, slice_melody, transpose, transpose_chords,
)
from scripts.sequence_graph import Pin, chord_trellis, melody_trellis, sample
from scripts.similarity import WeightParams, ms_distance
from scripts.style_model import StyleModel
from scripts.variation import build_bias, element_support

# -------------------- Plan Types --------------------


class DirectiveKind(str, Enum):
    FREE = "free"
    COPY = "copy"
    TRANSPOSED_COPY = "transposed_copy"
    VARIATION = "variation"
    HARMONY_TRANSPOSE = "harmony_transpose"


@dataclass(frozen=True)
class Directive:
    """What fills the target bars (1-based, inclusive)."""
    target: tuple[int, int]
    kind: DirectiveKind
    source: tuple[int, int] | None = None
    semitones: int = 0
    alpha: float = 0.0

    def label(self) -> str:
        text = f"{self.kind.value} {self.target[0]}-{self.target[1]}"
        if self.source:
            text += f" <- {self.source[0]}-{self.source[1]}"
        return text


@dataclass(frozen=True)
class StructurePlan:
    bars_total: int
    beats_per_bar: int
    pickup_ticks: int
    directives: tuple[Directive, ...]
    title: str = "Structured lead sheet"

    def __post_init__(self):
        object.__setattr__(self, "directives", tuple(self.directives))
        if self.bars_total < 1 or self.beats_per_bar < 1:
            raise PlanError("bars_total and beats_per_bar must be positive")
        if not 0 <= self.pickup_ticks < self.beats_per_bar * config.TICKS_PER_QUARTER:
            raise PlanError(f"pickup_ticks {self.pickup_ticks} must be shorter than a bar")

        covered = np.zeros(self.bars_total + 1, dtype=np.int64)
        for d in self.directives:
            self._check_range(d.target, d)
            covered[d.target[0]:d.target[1] + 1] += 1
            if d.kind is DirectiveKind.FREE:
                continue
            if d.source is None:
                raise PlanError(f"Directive '{d.label()}' needs a source bar range")
            self._check_range(d.source, d)
            if self._length(d.source) != self._length(d.target):
                raise PlanError(f"Directive '{d.label()}': source and target spans differ in length")
            if not 0.0 <= d.alpha <= 1.0:
                raise PlanError(f"Directive '{d.label()}': alpha must lie in [0, 1]")

        gaps = [b for b in range(1, self.bars_total + 1) if covered[b] != 1]
        if gaps:
            raise PlanError(f"Bars covered zero or several times: {gaps}")

    def _check_range(self, bars, d: Directive) -> None:
        if not 1 <= bars[0] <= bars[1] <= self.bars_total:
            raise PlanError(f"Directive '{d.label()}': bars {bars} outside 1-{self.bars_total}")

    def _length(self, bars) -> int:
        start, end = self.span(bars)
        return end - start

    def span(self, bars) -> tuple[int, int]:
        """Tick interval of an inclusive bar range."""
        return bar_span(self.beats_per_bar, self.pickup_ticks, bars[0], bars[1])

    @property
    def total_ticks(self) -> int:
        return self.span((1, self.bars_total))[1]

    def boundaries(self) -> list[int]:
        """
        Ticks no element may straddle: where directive targets and sources begin or
        end, plus every such tick inside a target carried back into its source, so
        that material copied into the target cannot cross it either.
        """
        ticks = set()
        for d in self.directives:
            ticks.update(self.span(d.target))
            if d.source:
                ticks.update(self.span(d.source))
        copies = [(self.span(d.target), self.span(d.source)[0]) for d in self.directives if d.source]
        pending = list(ticks)
        while pending:
            tick = pending.pop()
            for (start, end), source_start in copies:
                if start < tick < end:
                    mapped = tick - start + source_start
                    if mapped not in ticks:
                        ticks.add(mapped)
                        pending.append(mapped)
        return sorted(ticks)


def parse_plan(text: str, path: str = "<string>") -> StructurePlan:
    """
    Parses a plan file.

    Raises:
        CorpusParseError: If the JSON is malformed or a field has the wrong type.
        PlanError: If the plan violates its invariants.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise CorpusParseError(path, "<json>", e.pos, e.msg) from e
    if not isinstance(data, dict):
        raise CorpusParseError(path, "<root>", 0, "expected an object")

    def pair(value, field_name, offset):
        if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, int) for v in value)):
            raise CorpusParseError(path, field_name, offset, f"expected [first, last] bars, got {value!r}")
        return (value[0], value[1])

    try:
        directives = []
        for i, entry in enumerate(data["directives"]):
            try:
                kind = DirectiveKind(entry["kind"])
            except ValueError as e:
                raise CorpusParseError(path, "directives.kind", i, f"unknown kind {entry['kind']!r}") from e
            directives.append(Directive(
                target=pair(entry["target"], "directives.target", i),
                kind=kind,
                source=pair(entry["source"], "directives.source", i) if entry.get("source") is not None else None,
                semitones=int(entry.get("semitones", 0)),
                alpha=float(entry.get("alpha", 0.0)),
            ))
        return StructurePlan(
            bars_total=int(data["bars_total"]),
            beats_per_bar=int(data["beats_per_bar"]),
            pickup_ticks=int(data["pickup_ticks"]),
            directives=tuple(directives),
            title=str(data.get("title", "Structured lead sheet")),
        )
    except KeyError as e:
        raise CorpusParseError(path, str(e.args[0]), "-", "missing field") from e


def load_plan(path: str) -> StructurePlan:
    with open(path, "r", encoding="utf-8") as f:
        return parse_plan(f.read(), path)


# -------------------- Resolution --------------------


@dataclass(frozen=True)
class ScheduleStep:
    """
    One unit of work. action is "generate", "copy", "vary" or "reharmonize";
    pins lists the bar ranges already determined when the step runs.
    """
    bars: tuple[int, int]
    action: str
    directives: tuple[int, ...]
    pins: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class GenerationSchedule:
    steps: tuple[ScheduleStep, ...] = field(default_factory=tuple)


ACTIONS = {
    DirectiveKind.FREE: "generate",
    DirectiveKind.COPY: "copy",
    DirectiveKind.TRANSPOSED_COPY: "copy",
    DirectiveKind.VARIATION: "vary",
    DirectiveKind.HARMONY_TRANSPOSE: "reharmonize",
}


def dependency_graph(plan: StructurePlan) -> nx.DiGraph:
    """Edge i -> j when directive j reads bars that directive i fills."""
    graph = nx.DiGraph()
    for i, d in enumerate(plan.directives):
        graph.add_node(i, kind=d.kind.value, first_bar=d.target[0], last_bar=d.target[1])
    for j, d in enumerate(plan.directives):
        if d.source is None:
            continue
        for i, other in enumerate(plan.directives):
            if other.target[0] <= d.source[1] and d.source[0] <= other.target[1]:
                graph.add_edge(i, j)
    return graph


def resolve(plan: StructurePlan) -> GenerationSchedule:
    """
    Orders the directives left to right as far as dependencies allow. Copies are
    placed as soon as their source exists, so they act as pins for the free bars
    generated before them.

    Raises:
        PlanError: If directives depend on each other cyclically.
    """
    graph = dependency_graph(plan)
    try:
        cycle = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        labels = " -> ".join(plan.directives[i].label() for i, _ in cycle)
        raise PlanError(f"Cyclic plan: {labels}")

    directives = plan.directives
    done: list[int] = []
    pending = sorted(range(len(directives)), key=lambda i: directives[i].target[0])
    steps = []

    def ready(i: int) -> bool:
        return all(p in done for p in graph.predecessors(i))

    def pins() -> tuple:
        return tuple(sorted(directives[i].target for i in done))

    while pending:
        copies = [i for i in pending if ACTIONS[directives[i].kind] == "copy" and ready(i)]
        if copies:
            for i in copies:
                steps.append(ScheduleStep(directives[i].target, "copy", (i,), pins()))
                done.append(i)
                pending.remove(i)
            continue
        i = next(i for i in pending if ready(i))
        steps.append(ScheduleStep(directives[i].target, ACTIONS[directives[i].kind], (i,), pins()))
        done.append(i)
        pending.remove(i)

    return GenerationSchedule(tuple(_merge_free(steps)))


def _merge_free(steps: list[ScheduleStep]) -> list[ScheduleStep]:
    """Adjacent free steps with nothing placed in between are generated jointly."""
    merged = []
    for step in steps:
        last = merged[-1] if merged else None
        if (last is not None and last.action == step.action == "generate"
                and last.bars[1] + 1 == step.bars[0]):
            merged[-1] = ScheduleStep((last.bars[0], step.bars[1]), "generate",
                                      last.directives + step.directives, last.pins)
        else:
            merged.append(step)
    return merged


# -------------------- Execution --------------------


class _Track:
    """Determined elements of one voice, keyed by onset tick."""

    def __init__(self):
        self.placed: dict[int, object] = {}

    def place(self, start: int, elements) -> None:
        for onset, element in zip(onsets_of(elements), elements):
            self.placed[start + onset] = element

    def keep(self, elements, start: int, end: int) -> None:
        """Stores the elements of a full-piece path that fall inside [start, end)."""
        for onset, element in zip(onsets_of(elements), elements):
            if start <= onset < end:
                self.placed[onset] = element

    def span(self, start: int, end: int) -> tuple:
        return tuple(self.placed[t] for t in sorted(self.placed) if start <= t < end)

    def pins(self) -> list[Pin]:
        return [Pin(t, t + e.ticks, e) for t, e in sorted(self.placed.items())]

    def elements(self) -> tuple:
        return tuple(self.placed[t] for t in sorted(self.placed))


def _step_seed(seed: int, voice: int, step: int) -> int:
    return int(np.random.SeedSequence([seed, voice, step]).generate_state(1)[0])


def _step_name(voice: str, step: ScheduleStep) -> str:
    return f"{voice} {step.action} bars {step.bars[0]}-{step.bars[1]}"


def execute(plan: StructurePlan, model: StyleModel, seed: int, params: WeightParams = WeightParams(),
            alpha_override: float | None = None, renorm: str = config.DEFAULT_BIAS_RENORM) -> LeadSheet:
    """
    Executes a plan: chords first, then melody, one schedule step at a time, each
    step sampling a full-length trellis conditioned on every pinned element and
    keeping only its own bars.

    Args:
        plan (StructurePlan): The structure to realize.
        model (StyleModel): Order-1 style model.
        seed (int): Seed; identical inputs give identical lead sheets.
        params (WeightParams): Similarity weights for VARIATION directives.
        alpha_override (float, optional): Replaces every VARIATION alpha.

    Raises:
        StructuralInfeasibilityError: If a step admits no sequence once pinned.
    """
    schedule = resolve(plan)
    total = plan.total_ticks
    barriers = plan.boundaries()

    chords = _Track()
    for k, step in enumerate(schedule.steps):
        d = plan.directives[step.directives[0]]
        start, end = plan.span(step.bars)
        if step.action == "generate":
            trellis = chord_trellis(model, total, pins=chords.pins(), barriers=barriers, condition_on_pins=True)
            chords.keep(_sample_one(trellis, _step_seed(seed, 0, k), _step_name("chords", step)), start, end)
        else:
            source = chords.span(*plan.span(d.source))
            chords.place(start, transpose_chords(source, d.semitones))
    chord_track = chords.elements()

    melody = _Track()
    support = element_support(model.notes)
    for k, step in enumerate(schedule.steps):
        d = plan.directives[step.directives[0]]
        start, end = plan.span(step.bars)
        name = _step_name("melody", step)
        if step.action in ("generate", "reharmonize"):
            trellis = melody_trellis(model, chord_track, pins=melody.pins(), barriers=barriers, condition_on_pins=True)
            melody.keep(_sample_one(trellis, _step_seed(seed, 1, k), name), start, end)
        elif step.action == "copy":
            source = Melody(melody.span(*plan.span(d.source)))
            melody.place(start, transpose(source, d.semitones).notes)
        else:
            theme = transpose(Melody(melody.span(*plan.span(d.source))), d.semitones)
            alpha = d.alpha if alpha_override is None else alpha_override
            bias = build_bias(theme, model.notes.element_vocab, end - start, params, alpha,
                              support=support, offset=start)
            trellis = melody_trellis(model, chord_track, bias=bias, pins=melody.pins(), barriers=barriers,
                                     condition_on_pins=True, renorm=renorm)
            melody.keep(_sample_one(trellis, _step_seed(seed, 1, k), name), start, end)

    return LeadSheet(
        title=plan.title,
        beats_per_bar=plan.beats_per_bar,
        pickup_ticks=plan.pickup_ticks,
        chords=chord_track,
        melody=Melody(melody.elements()),
    )


def _sample_one(trellis, seed: int, name: str) -> tuple:
    try:
        return sample(trellis, seed, 1)[0].elements
    except InfeasibleModelError as e:
        raise StructuralInfeasibilityError(name, e) from e


# -------------------- Audit --------------------


@dataclass
class AuditReport:
    duration_ok: bool
    problems: list[str] = field(default_factory=list)
    variation_distances: dict[int, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.duration_ok and not self.problems


def pitch_offset(source: Melody, target: Melody) -> int | None:
    """
    Constant semitone offset mapping source onto target with identical rhythm and
    rest placement, or None. The median of the differences is the candidate
    offset; it must then hold for every note.
    """
    if source.durations != target.durations:
        return None
    if any(a.is_rest != b.is_rest for a, b in zip(source, target)):
        return None
    differences = [b.pitch - a.pitch for a, b in zip(source, target) if not a.is_rest]
    if not differences:
        return 0
    shift = int(np.median(differences))
    return shift if all(diff == shift for diff in differences) else None


def audit(plan: StructurePlan, sheet: LeadSheet, params: WeightParams = WeightParams()) -> AuditReport:
    """Mechanical structural checks computed from the output lead sheet alone."""
    report = AuditReport(duration_ok=sheet.total_ticks == plan.total_ticks)
    if not report.duration_ok:
        report.problems.append(f"lead sheet lasts {sheet.total_ticks} ticks, plan needs {plan.total_ticks}")
        return report

    for i, d in enumerate(plan.directives):
        if d.kind is DirectiveKind.FREE:
            continue
        target = slice_melody(sheet.melody, *plan.span(d.target))
        source = slice_melody(sheet.melody, *plan.span(d.source))
        target_chords = slice_chords(sheet.chords, *plan.span(d.target))
        source_chords = transpose_chords(slice_chords(sheet.chords, *plan.span(d.source)), d.semitones)

        if target_chords != source_chords:
            report.problems.append(f"'{d.label()}': chords differ from the (transposed) source")
        if d.kind is DirectiveKind.COPY and target != source:
            report.problems.append(f"'{d.label()}': melody is not an exact copy")
        elif d.kind is DirectiveKind.TRANSPOSED_COPY and pitch_offset(source, target) != d.semitones:
            report.problems.append(f"'{d.label()}': melody is not transposed by {d.semitones}")
        elif d.kind is DirectiveKind.VARIATION:
            theme = transpose(source, d.semitones)
            report.variation_distances[i] = ms_distance(target, theme, params).distance
    return report
