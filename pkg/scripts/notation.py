"""
notation.py

Domain types for symbolic music and the lead sheet corpus format, plus the melody
slicing and transposition utilities every other module builds on.

All durations are integer tick counts on a grid of 24 ticks per quarter note.
Pitches are MIDI numbers (C4 = 60); rests are ordinary notes whose pitch is REST.

Usage:
    from scripts.notation import Note, Melody, load_corpus, slice_melody
"""

import json
import os
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate

from scripts.config import TICKS_PER_QUARTER
from scripts.errors import CorpusParseError, TickRangeError, ValidationError

# -------------------- Constants --------------------

REST = -1

DURATION_TICKS = {
    "whole": 96,
    "half": 48,
    "dotted-quarter": 36,
    "quarter": 24,
    "dotted-eighth": 18,
    "eighth": 12,
    "triplet-eighth": 8,
    "sixteenth": 6,
}

# Chord quality -> chord tones as intervals above the root
QUALITY_INTERVALS = {
    "maj": (0, 4, 7),
    "min": (0, 3, 7),
    "dom7": (0, 4, 7, 10),
    "maj7": (0, 4, 7, 11),
    "min7": (0, 3, 7, 10),
    "m7b5": (0, 3, 6, 10),
    "dim": (0, 3, 6),
    "aug": (0, 4, 8),
}
QUALITIES = tuple(QUALITY_INTERVALS)

QUALITY_SUFFIX = {
    "maj": "", "min": "m", "dom7": "7", "maj7": "maj7",
    "min7": "m7", "m7b5": "m7b5", "dim": "dim", "aug": "aug",
}

# Mapping of note names to semitone values for pitch parsing.
NOTE_TO_SEMITONE = {
    "C": 0, "C#": 1, "Db": 1,
    "D": 2, "D#": 3, "Eb": 3,
    "E": 4, "E#": 5, "Fb": 4,
    "F": 5, "F#": 6, "Gb": 6,
    "G": 7, "G#": 8, "Ab": 8,
    "A": 9, "A#": 10, "Bb": 10,
    "B": 11, "Cb": 11, "B#": 0
}
PITCH_CLASS_NAMES = ("C", "Db", "D", "Eb", "E", "F", "Gb", "G", "Ab", "A", "Bb", "B")

# -------------------- Domain Types --------------------

Duration = int


@dataclass(frozen=True, order=True)
class Note:
    """A pitch (or REST) held for a whole number of ticks."""
    pitch: int
    ticks: Duration

    def __post_init__(self):
        if isinstance(self.pitch, bool) or not isinstance(self.pitch, int):
            raise ValidationError(f"Note pitch must be an integer, got {self.pitch!r}")
        if self.pitch != REST and not 0 <= self.pitch <= 127:
            raise ValidationError(f"Note pitch {self.pitch} outside 0-127")
        if isinstance(self.ticks, bool) or not isinstance(self.ticks, int) or self.ticks < 1:
            raise ValidationError(f"Note duration must be a positive tick count, got {self.ticks!r}")

    @property
    def is_rest(self) -> bool:
        return self.pitch == REST

    @property
    def pitch_class(self) -> int | None:
        return None if self.is_rest else self.pitch % 12

    def __str__(self) -> str:
        name = "rest" if self.is_rest else pitch_name(self.pitch)
        return f"{name}/{self.ticks}"


NoteState = Note


@dataclass(frozen=True)
class Melody:
    """Contiguous sequence of notes; onsets are implicit."""
    notes: tuple[Note, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))

    def __len__(self) -> int:
        return len(self.notes)

    def __iter__(self):
        return iter(self.notes)

    def __getitem__(self, index):
        return self.notes[index]

    @property
    def total_ticks(self) -> int:
        return sum(n.ticks for n in self.notes)

    @property
    def durations(self) -> tuple[int, ...]:
        return tuple(n.ticks for n in self.notes)

    @property
    def onsets(self) -> tuple[int, ...]:
        return tuple(onsets_of(self.notes))


@dataclass(frozen=True, order=True)
class ChordEvent:
    """A chord symbol (root pitch class + quality) held for a number of ticks."""
    root: int
    quality: str
    ticks: Duration

    def __post_init__(self):
        if isinstance(self.root, bool) or not isinstance(self.root, int) or not 0 <= self.root <= 11:
            raise ValidationError(f"Chord root must be a pitch class 0-11, got {self.root!r}")
        if self.quality not in QUALITY_INTERVALS:
            raise ValidationError(f"Unknown chord quality '{self.quality}'")
        if isinstance(self.ticks, bool) or not isinstance(self.ticks, int) or self.ticks < 1:
            raise ValidationError(f"Chord duration must be a positive tick count, got {self.ticks!r}")

    @property
    def symbol(self) -> tuple[int, str]:
        return (self.root, self.quality)

    @property
    def pitch_classes(self) -> frozenset[int]:
        return frozenset((self.root + i) % 12 for i in QUALITY_INTERVALS[self.quality])

    def __str__(self) -> str:
        return f"{chord_symbol(self)}/{self.ticks}"


@dataclass(frozen=True)
class LeadSheet:
    """A chord track and a melody track of equal length, plus metadata."""
    title: str
    beats_per_bar: int
    chords: tuple[ChordEvent, ...]
    melody: Melody
    pickup_ticks: int = 0

    def __post_init__(self):
        object.__setattr__(self, "chords", tuple(self.chords))
        if not isinstance(self.melody, Melody):
            object.__setattr__(self, "melody", Melody(tuple(self.melody)))
        if not isinstance(self.beats_per_bar, int) or self.beats_per_bar < 1:
            raise ValidationError(f"beats_per_bar must be a positive integer, got {self.beats_per_bar!r}")
        if not isinstance(self.pickup_ticks, int) or not 0 <= self.pickup_ticks < self.bar_ticks:
            raise ValidationError(
                f"pickup_ticks must lie in [0, {self.bar_ticks}), got {self.pickup_ticks!r}"
            )

        chord_total = sum(c.ticks for c in self.chords)
        melody_total = self.melody.total_ticks
        if chord_total != melody_total:
            raise ValidationError(
                f"'{self.title}': chord track lasts {chord_total} ticks but melody lasts {melody_total}"
            )
        if melody_total <= self.pickup_ticks or (melody_total - self.pickup_ticks) % self.bar_ticks:
            raise ValidationError(
                f"'{self.title}': {melody_total} ticks is not a whole number of "
                f"{self.bar_ticks}-tick bars after a {self.pickup_ticks}-tick pickup"
            )

    @property
    def bar_ticks(self) -> int:
        return self.beats_per_bar * TICKS_PER_QUARTER

    @property
    def total_ticks(self) -> int:
        return self.melody.total_ticks

    @property
    def bar_count(self) -> int:
        """Number of bars, counting the pickup as bar 1."""
        full = (self.total_ticks - self.pickup_ticks) // self.bar_ticks
        return full + (1 if self.pickup_ticks else 0)


# -------------------- Pitch & Chord Names --------------------

def parse_pitch(text: str) -> int:
    """
    Converts a note name like "C4", "F#3" or "rest" into a MIDI pitch (C4 = 60).

    Raises:
        ValueError: If the name or octave is not recognised.
    """
    text = text.strip()
    if text.lower() == "rest":
        return REST
    if text.lstrip("-").isdigit():
        return int(text)

    name = text.rstrip("-0123456789")
    octave = text[len(name):]
    name = name[:1].upper() + name[1:]
    if name not in NOTE_TO_SEMITONE or not octave:
        raise ValueError(f"Unknown note: '{text}'")

    pitch = (int(octave) + 1) * 12 + NOTE_TO_SEMITONE[name]
    # B#/Cb wrap across the octave boundary
    if name == "B#":
        pitch += 12
    elif name == "Cb":
        pitch -= 12
    if not 0 <= pitch <= 127:
        raise TickRangeError(f"Pitch '{text}' outside MIDI range")
    return pitch


def pitch_name(pitch: int) -> str:
    if pitch == REST:
        return "rest"
    return f"{PITCH_CLASS_NAMES[pitch % 12]}{pitch // 12 - 1}"


def chord_symbol(chord: ChordEvent) -> str:
    return PITCH_CLASS_NAMES[chord.root] + QUALITY_SUFFIX[chord.quality]


def sort_key(element) -> tuple:
    """Total order over notes, chords and the start-of-sequence marker (None)."""
    if element is None:
        return (-1,)
    if isinstance(element, Note):
        return (0, element.pitch, element.ticks)
    if isinstance(element, ChordEvent):
        return (1, element.root, QUALITIES.index(element.quality), element.ticks)
    if isinstance(element, tuple):
        return tuple(sort_key(e) for e in element)
    raise TypeError(f"Cannot order element {element!r}")


# -------------------- Time Helpers --------------------

def onsets_of(events) -> list[int]:
    """Onset tick of each event in a contiguous track."""
    ticks = [e.ticks for e in events]
    return [0] + list(accumulate(ticks))[:-1] if ticks else []


def chord_at(chords, t: int) -> ChordEvent:
    """
    Returns the chord sounding at tick t.

    Raises:
        TickRangeError: If t is outside [0, total duration of the chord track).
    """
    chords = tuple(chords)
    total = sum(c.ticks for c in chords)
    if not 0 <= t < total:
        raise TickRangeError(f"Tick {t} outside chord track span [0, {total})")
    return chords[bisect_right(onsets_of(chords), t) - 1]


def bar_span(beats_per_bar: int, pickup_ticks: int, first_bar: int, last_bar: int) -> tuple[int, int]:
    """
    Converts an inclusive 1-based bar range into a [start, end) tick interval.
    When a pickup is present it is bar 1 and lasts pickup_ticks.
    """
    if first_bar < 1 or last_bar < first_bar:
        raise TickRangeError(f"Invalid bar range {first_bar}-{last_bar}")
    bar_ticks = beats_per_bar * TICKS_PER_QUARTER

    def bar_start(bar: int) -> int:
        if pickup_ticks:
            return 0 if bar == 1 else pickup_ticks + (bar - 2) * bar_ticks
        return (bar - 1) * bar_ticks

    return bar_start(first_bar), bar_start(last_bar + 1)


# -------------------- Slicing & Transposition --------------------

def _slice_events(events, start: int, end: int, total: int, rebuild) -> list:
    if not 0 <= start < end <= total:
        raise TickRangeError(f"Interval [{start}, {end}) outside [0, {total}]")
    out = []
    for onset, event in zip(onsets_of(events), events):
        lo, hi = max(onset, start), min(onset + event.ticks, end)
        if lo < hi:
            out.append(event if hi - lo == event.ticks else rebuild(event, hi - lo))
    return out


def slice_melody(melody: Melody, start: int, end: int) -> Melody:
    """
    Extracts the ticks [start, end) of a melody. Notes overlapping a boundary are
    truncated to the overlapping portion and keep their pitch.

    Raises:
        TickRangeError: If the interval is empty or exceeds the melody.
    """
    notes = _slice_events(
        melody.notes, start, end, melody.total_ticks,
        lambda n, ticks: Note(n.pitch, ticks),
    )
    return Melody(tuple(notes))


def slice_chords(chords, start: int, end: int) -> tuple[ChordEvent, ...]:
    chords = tuple(chords)
    return tuple(_slice_events(
        chords, start, end, sum(c.ticks for c in chords),
        lambda c, ticks: ChordEvent(c.root, c.quality, ticks),
    ))


def slice_lead_sheet(sheet: LeadSheet, first_bar: int, last_bar: int) -> LeadSheet:
    """Extracts a bar range (1-based, inclusive) as a new lead sheet."""
    if last_bar > sheet.bar_count:
        raise TickRangeError(f"'{sheet.title}' has only {sheet.bar_count} bars")
    start, end = bar_span(sheet.beats_per_bar, sheet.pickup_ticks, first_bar, last_bar)
    pickup = sheet.pickup_ticks if first_bar == 1 else 0
    return LeadSheet(
        title=f"{sheet.title} (bars {first_bar}-{last_bar})",
        beats_per_bar=sheet.beats_per_bar,
        pickup_ticks=pickup,
        chords=slice_chords(sheet.chords, start, end),
        melody=slice_melody(sheet.melody, start, end),
    )


def transpose(melody: Melody, semitones: int) -> Melody:
    """
    Shifts every non-rest pitch by a number of semitones; rhythm is unchanged.

    Raises:
        TickRangeError: If a resulting pitch leaves 0-127.
    """
    notes = []
    for note in melody:
        if note.is_rest:
            notes.append(note)
            continue
        pitch = note.pitch + semitones
        if not 0 <= pitch <= 127:
            raise TickRangeError(f"Transposing {note} by {semitones} leaves the MIDI range")
        notes.append(Note(pitch, note.ticks))
    return Melody(tuple(notes))


def transpose_chords(chords, semitones: int) -> tuple[ChordEvent, ...]:
    return tuple(ChordEvent((c.root + semitones) % 12, c.quality, c.ticks) for c in chords)


def chord_tone_vector(root: int, quality: str) -> tuple[int, ...]:
    """12-dimensional binary chord-tone vector of a chord symbol."""
    if quality not in QUALITY_INTERVALS:
        raise ValueError(f"Unknown chord quality '{quality}'")
    tones = {(root + i) % 12 for i in QUALITY_INTERVALS[quality]}
    return tuple(1 if pc in tones else 0 for pc in range(12))


# -------------------- Corpus I/O --------------------

def _require(data: dict, path: str, field: str, kind, offset="-"):
    if field not in data:
        raise CorpusParseError(path, field, offset, "missing field")
    value = data[field]
    if isinstance(value, bool) or not isinstance(value, kind):
        raise CorpusParseError(path, field, offset, f"expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def parse_lead_sheet(text: str, path: str = "<string>") -> LeadSheet:
    """
    Parses one lead sheet in the corpus JSON schema.

    Raises:
        CorpusParseError: If the text is not valid JSON or a field is malformed.
        ValidationError: If the parsed lead sheet violates its invariants.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise CorpusParseError(path, "<json>", e.pos, e.msg) from e
    if not isinstance(data, dict):
        raise CorpusParseError(path, "<root>", 0, "expected an object")

    title = _require(data, path, "title", str)
    beats = _require(data, path, "beats_per_bar", int)
    pickup = _require(data, path, "pickup_ticks", int)

    chords = []
    for i, entry in enumerate(_require(data, path, "chords", list)):
        if not isinstance(entry, dict):
            raise CorpusParseError(path, "chords", i, "expected an object")
        root = entry.get("root")
        if isinstance(root, bool) or not isinstance(root, int) or not 0 <= root <= 11:
            raise CorpusParseError(path, "chords.root", i, f"expected 0-11, got {root!r}")
        quality = entry.get("quality")
        if quality not in QUALITY_INTERVALS:
            raise CorpusParseError(path, "chords.quality", i, f"unknown quality {quality!r}")
        ticks = entry.get("ticks")
        if isinstance(ticks, bool) or not isinstance(ticks, int) or ticks < 1:
            raise CorpusParseError(path, "chords.ticks", i, f"expected positive int, got {ticks!r}")
        chords.append(ChordEvent(root, quality, ticks))

    notes = []
    for i, entry in enumerate(_require(data, path, "melody", list)):
        if not isinstance(entry, dict):
            raise CorpusParseError(path, "melody", i, "expected an object")
        pitch = entry.get("pitch")
        if pitch == "rest":
            pitch = REST
        elif isinstance(pitch, bool) or not isinstance(pitch, int) or not 0 <= pitch <= 127:
            raise CorpusParseError(path, "melody.pitch", i, f"expected 0-127 or \"rest\", got {pitch!r}")
        ticks = entry.get("ticks")
        if isinstance(ticks, bool) or not isinstance(ticks, int) or ticks < 1:
            raise CorpusParseError(path, "melody.ticks", i, f"expected positive int, got {ticks!r}")
        notes.append(Note(pitch, ticks))

    try:
        return LeadSheet(
            title=title, beats_per_bar=beats, pickup_ticks=pickup,
            chords=tuple(chords), melody=Melody(tuple(notes)),
        )
    except ValidationError as e:
        raise ValidationError(f"{path}: {e}") from e


def dump_lead_sheet(sheet: LeadSheet) -> str:
    """
    Canonical serialization: fixed field order, one chord or note per line,
    no omitted fields. parse_lead_sheet(dump_lead_sheet(s)) == s.
    """
    def entries(items) -> str:
        if not items:
            return "[]"
        body = ",\n".join("    " + json.dumps(item) for item in items)
        return "[\n" + body + "\n  ]"

    chords = [{"root": c.root, "quality": c.quality, "ticks": c.ticks} for c in sheet.chords]
    melody = [
        {"pitch": "rest" if n.is_rest else n.pitch, "ticks": n.ticks}
        for n in sheet.melody
    ]
    return (
        "{\n"
        f"  \"title\": {json.dumps(sheet.title)},\n"
        f"  \"beats_per_bar\": {sheet.beats_per_bar},\n"
        f"  \"pickup_ticks\": {sheet.pickup_ticks},\n"
        f"  \"chords\": {entries(chords)},\n"
        f"  \"melody\": {entries(melody)}\n"
        "}\n"
    )


def load_lead_sheet(path: str) -> LeadSheet:
    with open(path, "r", encoding="utf-8") as f:
        return parse_lead_sheet(f.read(), path)


def save_lead_sheet(sheet: LeadSheet, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dump_lead_sheet(sheet))


def load_corpus(path: str) -> list[LeadSheet]:
    """
    Loads every *.json lead sheet in a directory, in file-name order.

    Raises:
        CorpusParseError: If a file is malformed (names file, field and offset).
        ValidationError: If a lead sheet violates its invariants.
    """
    if not os.path.isdir(path):
        raise ValidationError(f"Corpus directory not found: {path}")
    files = sorted(f for f in os.listdir(path) if f.endswith(".json"))
    return [load_lead_sheet(os.path.join(path, f)) for f in files]
