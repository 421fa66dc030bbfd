"""Kaldi-convention corpus manifests, CTM alignments, and confidence cleansing.

A data directory holds whitespace-separated text tables, one record per
line, first token the key:

    wav.scp    <recording-id> <audio-path>
    segments   <utterance-id> <recording-id> <start> <end>     (optional)
    text       <utterance-id> <word> ...
    utt2spk    <utterance-id> <speaker-id>                     (optional)

When ``segments`` is absent the corpus is unsegmented: every recording is
one utterance spanning the whole file and utterance ids equal recording
ids. When ``utt2spk`` is absent every utterance is its own speaker.

CTM rows are ``<utt-id> <channel> <start> <duration> <word> [<confidence>]``
with utterance-relative times in seconds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

log = logging.getLogger(__name__)


class ManifestError(ValueError):
    """Malformed data directory or manifest invariant violation."""


class CtmError(ValueError):
    """Malformed CTM content."""


@dataclass(frozen=True)
class Segment:
    """One utterance as a time slice of a recording."""

    utt_id: str
    recording_id: str
    start: float
    end: float
    speaker_id: str

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ManifestError(f"segment '{self.utt_id}': start {self.start} < 0")
        if self.end <= self.start:
            raise ManifestError(
                f"segment '{self.utt_id}': end {self.end} must exceed start {self.start}"
            )

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class WordAlignment:
    """One CTM row: a time-stamped word with optional confidence."""

    utt_id: str
    start: float
    duration: float
    word: str
    confidence: float | None = None

    def __post_init__(self) -> None:
        if self.start < 0:
            raise CtmError(f"word '{self.word}' in '{self.utt_id}': start {self.start} < 0")
        if self.duration <= 0:
            raise CtmError(
                f"word '{self.word}' in '{self.utt_id}': duration {self.duration} must be > 0"
            )
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise CtmError(
                f"word '{self.word}' in '{self.utt_id}': confidence {self.confidence} "
                "outside [0, 1]"
            )

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(eq=False)
class Manifest:
    """A corpus: recordings, optional segments, transcripts, speaker map.

    ``segments`` empty means the corpus is unsegmented and the utterance set
    equals the recording set. Segment order is not meaningful; equality
    compares segments as a set.
    """

    recordings: dict[str, str] = field(default_factory=dict)
    segments: list[Segment] = field(default_factory=list)
    transcripts: dict[str, list[str]] = field(default_factory=dict)
    utt2spk: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Manifest):
            return NotImplemented
        return (
            self.recordings == other.recordings
            and sorted(self.segments, key=lambda s: s.utt_id)
            == sorted(other.segments, key=lambda s: s.utt_id)
            and self.transcripts == other.transcripts
            and self.utt2spk == other.utt2spk
        )

    @property
    def utt_ids(self) -> list[str]:
        if self.segments:
            return [s.utt_id for s in self.segments]
        return list(self.recordings)

    def speaker_of(self, utt_id: str) -> str:
        return self.utt2spk.get(utt_id, utt_id)

    def validate(self) -> None:
        if self.segments:
            seen: set[str] = set()
            for seg in self.segments:
                if seg.utt_id in seen:
                    raise ManifestError(f"duplicate utterance id '{seg.utt_id}' in segments")
                seen.add(seg.utt_id)
                if seg.recording_id not in self.recordings:
                    raise ManifestError(
                        f"segment '{seg.utt_id}': dangling reference to recording "
                        f"'{seg.recording_id}'"
                    )
            utts = seen
        else:
            utts = set(self.recordings)
        for name, keys in (("transcripts", self.transcripts), ("utt2spk", self.utt2spk)):
            for utt in keys:
                if utt not in utts:
                    raise ManifestError(
                        f"{name}: dangling reference to unknown utterance '{utt}'"
                    )


def format_fixed2(value: float) -> str:
    """Serialize a non-negative real at 2 decimals, rounding half away from zero.

    Used for all times (10 ms is the native CTM resolution) and for CTM
    confidences.
    """
    if value < 0:
        raise ValueError(f"negative value {value}")
    cents = int(math.floor(value * 100.0 + 0.5))
    return f"{cents // 100}.{cents % 100:02d}"


def _read_lines(path: Path) -> list[tuple[int, list[str]]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if fields:
                rows.append((lineno, fields))
    return rows


def _read_keyed_table(path: Path, n_fields: int | None) -> dict[str, list[str]]:
    """First token is the key; duplicate keys or wrong arity raise with line numbers."""
    table: dict[str, list[str]] = {}
    for lineno, fields in _read_lines(path):
        if n_fields is not None and len(fields) != n_fields:
            raise ManifestError(
                f"{path.name} line {lineno}: expected {n_fields} fields, got {len(fields)}"
            )
        key = fields[0]
        if key in table:
            raise ManifestError(f"{path.name} line {lineno}: duplicate id '{key}'")
        table[key] = fields[1:]
    return table


def parse_data_dir(root: str | Path) -> Manifest:
    """Parse a data directory into a validated Manifest.

    ``wav.scp`` and ``text`` are required; ``segments`` and ``utt2spk`` are
    optional with the conventions described in the module docstring.
    """
    root = Path(root)
    wav_path = root / "wav.scp"
    text_path = root / "text"
    for path in (wav_path, text_path):
        if not path.is_file():
            raise ManifestError(f"missing file: {path}")

    recordings = {rec: rest[0] for rec, rest in _read_keyed_table(wav_path, 2).items()}
    for rec, audio in recordings.items():
        if audio.endswith("|"):
            raise ManifestError(f"wav.scp entry '{rec}': command pipes are not supported")

    transcripts = {utt: words for utt, words in _read_keyed_table(text_path, None).items()}

    utt2spk_path = root / "utt2spk"
    utt2spk = (
        {u: rest[0] for u, rest in _read_keyed_table(utt2spk_path, 2).items()}
        if utt2spk_path.is_file()
        else {}
    )

    segments: list[Segment] = []
    seg_path = root / "segments"
    if seg_path.is_file():
        seen: set[str] = set()
        for lineno, fields in _read_lines(seg_path):
            if len(fields) != 4:
                raise ManifestError(
                    f"segments line {lineno}: expected 4 fields, got {len(fields)}"
                )
            utt, rec, start_s, end_s = fields
            if utt in seen:
                raise ManifestError(f"segments line {lineno}: duplicate id '{utt}'")
            seen.add(utt)
            try:
                start, end = float(start_s), float(end_s)
            except ValueError:
                raise ManifestError(
                    f"segments line {lineno}: non-numeric time '{start_s} {end_s}'"
                ) from None
            if rec not in recordings:
                raise ManifestError(
                    f"segments line {lineno}: dangling reference to recording '{rec}'"
                )
            segments.append(Segment(utt, rec, start, end, utt2spk.get(utt, utt)))

    utts = {s.utt_id for s in segments} if segments else set(recordings)
    for name, keys in (("text", transcripts), ("utt2spk", utt2spk)):
        for utt in keys:
            if utt not in utts:
                raise ManifestError(f"{name}: dangling reference to unknown utterance '{utt}'")
    # absent utt2spk rows default to speaker == utterance id
    utt2spk = {u: utt2spk.get(u, u) for u in sorted(utts)}

    return Manifest(recordings, segments, transcripts, utt2spk)


def write_data_dir(manifest: Manifest, root: str | Path) -> None:
    """Write a data directory that re-parses to an equal Manifest.

    Lines are sorted by key and times printed at exactly 2 decimals, so the
    round trip is the identity for manifests whose times are 2-decimal
    values (the native resolution of the formats).
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    _write_table(root / "wav.scp", ((rec, path) for rec, path in manifest.recordings.items()))
    _write_table(
        root / "text",
        ((utt, " ".join(words)) for utt, words in manifest.transcripts.items()),
    )
    _write_table(root / "utt2spk", ((u, s) for u, s in manifest.utt2spk.items()))
    if manifest.segments:
        _write_table(
            root / "segments",
            (
                (
                    s.utt_id,
                    f"{s.recording_id} {format_fixed2(s.start)} {format_fixed2(s.end)}",
                )
                for s in manifest.segments
            ),
        )


def _write_table(path: Path, rows: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, rest in sorted(rows):
            fh.write(f"{key} {rest}\n" if rest else f"{key}\n")


def parse_ctm(text: str | Iterable[str]) -> list[WordAlignment]:
    """Parse CTM rows, preserving file order.

    Verifies that each utterance's words do not overlap once sorted by
    start time. The channel field is read and discarded (the toolkit is
    mono-only).
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    rows: list[WordAlignment] = []
    for lineno, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) not in (5, 6):
            raise CtmError(f"CTM line {lineno}: expected 5 or 6 fields, got {len(fields)}")
        utt, _channel, start_s, dur_s, word = fields[:5]
        try:
            start, dur = float(start_s), float(dur_s)
        except ValueError:
            raise CtmError(
                f"CTM line {lineno}: non-numeric start/duration '{start_s} {dur_s}'"
            ) from None
        conf = None
        if len(fields) == 6:
            try:
                conf = float(fields[5])
            except ValueError:
                raise CtmError(f"CTM line {lineno}: non-numeric confidence '{fields[5]}'") from None
            if not (0.0 <= conf <= 1.0):
                raise CtmError(f"CTM line {lineno}: confidence {conf} outside [0, 1]")
        try:
            rows.append(WordAlignment(utt, start, dur, word, conf))
        except CtmError as exc:
            raise CtmError(f"CTM line {lineno}: {exc}") from None

    by_utt: dict[str, list[WordAlignment]] = {}
    for row in rows:
        by_utt.setdefault(row.utt_id, []).append(row)
    for utt, words in by_utt.items():
        ordered = sorted(words, key=lambda a: a.start)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.start < prev.end - 1e-9:
                raise CtmError(f"overlapping words in utterance '{utt}'")
    return rows


def write_ctm(alignments: Iterable[WordAlignment], channel: str = "1") -> str:
    """Serialize alignments as CTM text, times at 2 decimals."""
    out = []
    for a in alignments:
        line = f"{a.utt_id} {channel} {format_fixed2(a.start)} {format_fixed2(a.duration)} {a.word}"
        if a.confidence is not None:
            line += f" {format_fixed2(a.confidence)}"
        out.append(line + "\n")
    return "".join(out)


def read_ctm_file(path: str | Path) -> list[WordAlignment]:
    return parse_ctm(Path(path).read_text(encoding="utf-8"))


def cleanse(
    manifest: Manifest,
    alignments: Iterable[WordAlignment],
    min_avg_conf: float,
    min_words: int = 0,
) -> Manifest:
    """Keep utterances whose mean word confidence and word count pass thresholds.

    The utterance score is the unweighted mean of its word confidences.
    Utterances with no alignment rows are dropped with a warning (they are
    the ones a recognizer could not align at all); recordings left without
    any utterance are dropped too.
    """
    if not (0.0 <= min_avg_conf <= 1.0):
        raise ValueError(f"min_avg_conf {min_avg_conf} outside [0, 1]")
    if min_words < 0:
        raise ValueError(f"min_words {min_words} must be >= 0")

    utts = set(manifest.utt_ids)
    by_utt: dict[str, list[WordAlignment]] = {}
    for row in alignments:
        if row.utt_id in utts:
            by_utt.setdefault(row.utt_id, []).append(row)

    kept: set[str] = set()
    unaligned = 0
    for utt in utts:
        rows = by_utt.get(utt)
        if not rows:
            unaligned += 1
            continue
        for row in rows:
            if row.confidence is None:
                raise ManifestError(
                    f"confidence required: word '{row.word}' of utterance '{utt}' has none"
                )
        mean_conf = sum(r.confidence for r in rows) / len(rows)
        if mean_conf >= min_avg_conf and len(rows) >= min_words:
            kept.add(utt)
    if unaligned:
        log.warning("cleanse: dropped %d utterances with no alignments", unaligned)

    if manifest.segments:
        segments = [s for s in manifest.segments if s.utt_id in kept]
        live_recs = {s.recording_id for s in segments}
        recordings = {r: p for r, p in manifest.recordings.items() if r in live_recs}
    else:
        segments = []
        recordings = {r: p for r, p in manifest.recordings.items() if r in kept}
    transcripts = {u: w for u, w in manifest.transcripts.items() if u in kept}
    utt2spk = {u: s for u, s in manifest.utt2spk.items() if u in kept}
    return Manifest(recordings, segments, transcripts, utt2spk)
