"""Diarized transcript ingestion, narrator detection, and training-sample construction.

Transcript files are strict TSV: a `#doc_id=<id>` header line followed by
`speaker_id<TAB>start_s<TAB>end_s<TAB>text` records with seconds carrying at
least two fractional digits. Malformed lines are rejected with their line
number, never repaired or skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, ParseError

_SECONDS_RE = re.compile(r"^[0-9]+\.[0-9]{2,}$")


@dataclass(frozen=True)
class SpeakerSegment:
    """One diarized utterance with timestamps."""

    speaker_id: str
    start_s: float
    end_s: float
    text: str

    def __post_init__(self):
        if not self.speaker_id.strip():
            raise ValueError("speaker_id must be non-empty")
        if not self.text.strip():
            raise ValueError("segment text must be non-empty")
        if self.start_s < 0 or not self.start_s < self.end_s:
            raise ValueError(
                f"segment needs 0 <= start_s < end_s, got [{self.start_s}, {self.end_s}]"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def word_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class DocumentaryRecord:
    """A full documentary transcript: ordered segments plus total duration."""

    doc_id: str
    segments: tuple[SpeakerSegment, ...]
    duration_s: float

    def __post_init__(self):
        if not self.doc_id.strip():
            raise ValueError("doc_id must be non-empty")
        starts = [s.start_s for s in self.segments]
        if starts != sorted(starts):
            raise ValueError("segments must be sorted by start_s")
        if self.segments and self.duration_s < max(s.end_s for s in self.segments):
            raise ValueError("duration_s must cover every segment")

    @classmethod
    def from_segments(
        cls,
        doc_id: str,
        segments: Sequence[SpeakerSegment],
        duration_s: Optional[float] = None,
    ) -> "DocumentaryRecord":
        """Build a record, sorting segments by start time."""
        ordered = tuple(sorted(segments, key=lambda s: s.start_s))
        if duration_s is None:
            duration_s = max((s.end_s for s in ordered), default=0.0)
        return cls(doc_id=doc_id, segments=ordered, duration_s=duration_s)

    @property
    def speakers(self) -> list[str]:
        return sorted({s.speaker_id for s in self.segments})


@dataclass(eq=False)
class ClipRecord:
    """A quotable clip: one non-narrator segment, optionally with embeddings.

    frame_embeddings, when present, holds exactly three vectors of one shared
    dimension (three sampled frames of the clip).
    """

    clip_id: str
    doc_id: str
    start_s: float
    end_s: float
    transcript: str
    text_embedding: Optional[np.ndarray] = None
    frame_embeddings: Optional[tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"clip {self.clip_id}: start_s must precede end_s")
        if self.frame_embeddings is not None:
            if len(self.frame_embeddings) != 3:
                raise ValueError(f"clip {self.clip_id}: expected 3 frame embeddings")
            dims = {v.shape[0] for v in self.frame_embeddings}
            if len(dims) != 1:
                raise ValueError(f"clip {self.clip_id}: frame embeddings disagree on dim")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class TrainingSample:
    """Retrieval training sample: surrounding narrations plus the true clip."""

    prev_narration: str
    next_narration: str
    positive_clip_id: str
    doc_id: str

    def __post_init__(self):
        if not (self.prev_narration.strip() or self.next_narration.strip()):
            raise ValueError("a training sample needs at least one narration side")


def load_transcript(path) -> DocumentaryRecord:
    """Parse a transcript file into a DocumentaryRecord.

    Raises ParseError (with the line number) on any malformed line; segments
    arrive sorted by start_s regardless of file order.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError("transcript file not found", path=path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty transcript", path=path)

    header = lines[0].strip()
    if not header.startswith("#doc_id="):
        raise ParseError("expected '#doc_id=<id>' header", path=path, line=1)
    doc_id = header[len("#doc_id="):].strip()
    if not doc_id:
        raise ParseError("empty doc_id in header", path=path, line=1)

    segments = []
    for lineno, raw in enumerate(lines[1:], start=2):
        fields = raw.split("\t")
        if len(fields) != 4:
            raise ParseError(
                f"expected 4 tab-separated fields, got {len(fields)}",
                path=path, line=lineno,
            )
        speaker, start_txt, end_txt, text = fields
        if not speaker.strip():
            raise ParseError("empty speaker_id", path=path, line=lineno)
        for label, value in (("start_s", start_txt), ("end_s", end_txt)):
            if not _SECONDS_RE.match(value):
                raise ParseError(
                    f"{label} must be decimal seconds with >= 2 fractional digits, got {value!r}",
                    path=path, line=lineno,
                )
        start_s, end_s = float(start_txt), float(end_txt)
        if not start_s < end_s:
            raise ParseError(
                f"start_s {start_txt} must precede end_s {end_txt}",
                path=path, line=lineno,
            )
        if not text.strip():
            raise ParseError("empty segment text", path=path, line=lineno)
        segments.append(SpeakerSegment(speaker.strip(), start_s, end_s, text.strip()))

    if not segments:
        raise ParseError("empty transcript (no segment records)", path=path)
    return DocumentaryRecord.from_segments(doc_id, segments)


def _format_seconds(value: float) -> str:
    # keep two digits when exact, full precision otherwise
    if abs(value - round(value, 2)) < 1e-12:
        return f"{value:.2f}"
    return repr(value)


def write_transcript(doc: DocumentaryRecord, path) -> None:
    """Write a record back out in the transcript file format."""
    lines = [f"#doc_id={doc.doc_id}"]
    for seg in doc.segments:
        lines.append(
            "\t".join(
                (seg.speaker_id, _format_seconds(seg.start_s), _format_seconds(seg.end_s), seg.text)
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def identify_narrator(doc: DocumentaryRecord, by: str = "words") -> str:
    """Pick the narrator: the speaker with the longest transcript.

    `by` selects the length measure: "words" (whitespace tokens, the default)
    or "duration" (summed segment seconds). Ties break to the
    lexicographically smallest speaker_id.
    """
    if not doc.segments:
        raise DataError(f"documentary {doc.doc_id} has no segments")
    if by not in ("words", "duration"):
        raise ValueError(f"unknown narrator measure {by!r}")
    totals: dict[str, float] = {}
    for seg in doc.segments:
        amount = seg.word_count if by == "words" else seg.duration_s
        totals[seg.speaker_id] = totals.get(seg.speaker_id, 0.0) + amount
    return min(totals, key=lambda sp: (-totals[sp], sp))


def clip_id_for(doc_id: str, segment_index: int) -> str:
    """Stable clip id for the segment at `segment_index` within its documentary."""
    return f"{doc_id}.q{segment_index:04d}"


def extract_quotable_clips(
    doc: DocumentaryRecord, narrator: Optional[str] = None
) -> list[ClipRecord]:
    """All non-narrator segments as quotable clips, order and timestamps kept.

    With narrator=None every segment is quotable. Embeddings are left unset.
    """
    clips = []
    for i, seg in enumerate(doc.segments):
        if narrator is not None and seg.speaker_id == narrator:
            continue
        clips.append(
            ClipRecord(
                clip_id=clip_id_for(doc.doc_id, i),
                doc_id=doc.doc_id,
                start_s=seg.start_s,
                end_s=seg.end_s,
                transcript=seg.text,
            )
        )
    return clips


def chunk_transcript(doc: DocumentaryRecord, n: int = 10) -> list[str]:
    """Partition the segment sequence into n contiguous chunks of near-equal size.

    Sizes differ by at most one with larger chunks first; when there are fewer
    segments than chunks the trailing chunks are empty strings. Each chunk is
    its segments' texts joined by single spaces.
    """
    if n < 1:
        raise ValueError("chunk count must be >= 1")
    count = len(doc.segments)
    base, rem = divmod(count, n)
    chunks = []
    pos = 0
    for i in range(n):
        size = base + (1 if i < rem else 0)
        chunks.append(" ".join(seg.text for seg in doc.segments[pos:pos + size]))
        pos += size
    return chunks


def build_training_samples(doc: DocumentaryRecord, narrator: str) -> list[TrainingSample]:
    """One sample per non-narrator segment, flanked by its nearest narrations.

    prev/next are the nearest preceding/succeeding narrator segment texts
    (empty at a boundary); consecutive quotable segments between the same two
    narrations share the pair. Segments with no narration on either side are
    dropped: there is nothing to build a query from.
    """
    segs = doc.segments
    next_narration = [""] * len(segs)
    upcoming = ""
    for i in range(len(segs) - 1, -1, -1):
        next_narration[i] = upcoming
        if segs[i].speaker_id == narrator:
            upcoming = segs[i].text

    samples = []
    prev = ""
    for i, seg in enumerate(segs):
        if seg.speaker_id == narrator:
            prev = seg.text
            continue
        if not prev and not next_narration[i]:
            continue
        samples.append(
            TrainingSample(
                prev_narration=prev,
                next_narration=next_narration[i],
                positive_clip_id=clip_id_for(doc.doc_id, i),
                doc_id=doc.doc_id,
            )
        )
    return samples
