"""Teaser timeline assembly and edit-decision-list export.

Narration elements become narration-visual entries whose intervals come from
a highlight scorer over the documentary's per-second frames (FPS = 1); quote
elements insert their clip verbatim. A sliding window over the last three
selections forbids immediate repeats.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .embedding import TextEmbedder, as_vector, cosine_similarity
from .errors import DataError, ParseError
from .retriever import CandidatePool, _text_rank
from .script import Narration, QuotePlaceholder, Script

EDL_HEADER = ["kind", "source_doc", "clip_or_start", "end", "duration_s", "text"]

# scorer(narration_text, frames_matrix) -> per-frame scores, shape (F,)
HighlightScorer = Callable[[str, np.ndarray], np.ndarray]

DEDUP_WINDOW = 3


@dataclass(frozen=True)
class FramePool:
    """Per-second frame embeddings for one documentary (row index = second)."""

    doc_id: str
    embeddings: np.ndarray  # (F, d)

    def __post_init__(self):
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] == 0:
            raise ValueError("frame pool needs a non-empty (F, d) matrix")

    @property
    def frame_count(self) -> int:
        return self.embeddings.shape[0]


@dataclass(frozen=True)
class TimelineEntry:
    """One timeline row: a narration visual interval or an inserted quote clip."""

    kind: str                      # "narration" | "quote"
    source_doc: str
    start_s: float
    end_s: float
    duration_s: float
    text: str = ""
    clip_id: Optional[str] = None  # quotes only

    def __post_init__(self):
        if self.kind not in ("narration", "quote"):
            raise ValueError(f"unknown entry kind {self.kind!r}")
        if self.duration_s <= 0:
            raise ValueError("entry duration must be positive")
        if self.kind == "quote" and not self.clip_id:
            raise ValueError("quote entries must carry a clip_id")

    def frames(self) -> list[tuple[str, int]]:
        """Frame identities covered by this entry at FPS = 1."""
        lo = math.floor(self.start_s)
        hi = max(lo + 1, math.ceil(self.end_s))
        return [(self.source_doc, s) for s in range(lo, hi)]

    def selection_key(self):
        if self.kind == "quote":
            return ("clip", self.clip_id)
        return ("interval", self.source_doc, self.start_s, self.end_s)


@dataclass(frozen=True)
class TeaserTimeline:
    doc_id: str
    entries: tuple[TimelineEntry, ...]

    @property
    def total_duration_s(self) -> float:
        return sum(e.duration_s for e in self.entries)

    def frames(self) -> list[tuple[str, int]]:
        out = []
        for e in self.entries:
            out.extend(e.frames())
        return out


def default_scorer(text_embedder: TextEmbedder) -> HighlightScorer:
    """Cosine between the narration's text embedding and each frame embedding."""

    def scorer(text: str, frames: np.ndarray) -> np.ndarray:
        t = as_vector(text_embedder(text), "narration embedding")
        return np.array([cosine_similarity(t, frames[i]) for i in range(frames.shape[0])])

    return scorer


def _ranked_intervals(
    narration: str, frame_pool: FramePool, scorer: HighlightScorer, window_s: int
) -> list[tuple[float, int]]:
    """All candidate intervals as (mean score, start), best first, earliest on ties."""
    if window_s < 1:
        raise ValueError("window_s must be >= 1")
    f = frame_pool.frame_count
    if window_s > f:
        raise DataError(
            f"window of {window_s}s exceeds the {f}s video ({frame_pool.doc_id})"
        )
    scores = scorer(narration, frame_pool.embeddings)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (f,):
        raise ValueError("scorer must return one score per frame")
    means = [float(np.mean(scores[t: t + window_s])) for t in range(f - window_s + 1)]
    return sorted(((m, t) for t, m in enumerate(means)), key=lambda p: (-p[0], p[1]))


def match_narration_visuals(
    narration: str,
    frame_pool: FramePool,
    scorer: HighlightScorer,
    window_s: int,
) -> tuple[int, int]:
    """Best contiguous interval of `window_s` seconds for a narration.

    Maximizes the mean scorer value over the interval's frames; ties go to
    the earliest interval. Returns (start_s, end_s) in whole seconds.
    """
    best_score, best_start = _ranked_intervals(narration, frame_pool, scorer, window_s)[0]
    return best_start, best_start + window_s


def assemble(
    script: Script,
    pool: CandidatePool,
    frame_pool: FramePool,
    scorer: Optional[HighlightScorer] = None,
    text_embedder: Optional[TextEmbedder] = None,
    narration_rate_wpm: float = 150.0,
    quote_rankings: Optional[dict[int, Sequence[str]]] = None,
) -> TeaserTimeline:
    """Assemble a fulfilled script into a teaser timeline.

    Narration duration models speech at `narration_rate_wpm` words per
    minute; its visual window is that duration rounded up to whole seconds.
    Any candidate identical to one of the previous three selections is
    skipped for the next-best candidate; assembly fails loudly when a pool
    cannot satisfy that constraint.

    quote_rankings optionally maps a quote's element index to its retrieval
    ranking (clip ids, best first); without it quotes re-rank by
    text-embedding similarity with the resolved clip pinned first.
    """
    if narration_rate_wpm <= 0:
        raise ValueError("narration_rate_wpm must be positive")
    if scorer is None:
        if text_embedder is None:
            raise DataError("assemble needs a scorer or a text embedder")
        scorer = default_scorer(text_embedder)

    window: deque = deque(maxlen=DEDUP_WINDOW)
    entries: list[TimelineEntry] = []

    def pick(candidates: list[TimelineEntry], what: str) -> TimelineEntry:
        for cand in candidates:
            if cand.selection_key() not in window:
                window.append(cand.selection_key())
                return cand
        raise DataError(
            f"{what}: every candidate repeats a selection from the last "
            f"{DEDUP_WINDOW}; pool exhausted"
        )

    for i, el in enumerate(script.elements):
        if isinstance(el, QuotePlaceholder):
            raise DataError(f"element {i}: unresolved placeholder; fulfill the script first")
        if isinstance(el, Narration):
            duration = len(el.text.split()) / narration_rate_wpm * 60.0
            window_s = max(1, math.ceil(duration))
            ranked = _ranked_intervals(el.text, frame_pool, scorer, window_s)
            candidates = [
                TimelineEntry(
                    kind="narration",
                    source_doc=frame_pool.doc_id,
                    start_s=float(t),
                    end_s=float(t + window_s),
                    duration_s=duration,
                    text=el.text,
                )
                for _score, t in ranked
            ]
            entries.append(pick(candidates, f"narration element {i}"))
        else:
            if el.resolved_clip_id is None:
                raise DataError(f"element {i}: direct quote lacks a resolved clip id")
            if el.resolved_clip_id not in pool.index:
                raise DataError(
                    f"element {i}: resolved clip {el.resolved_clip_id} not in pool"
                )
            if quote_rankings is not None and i in quote_rankings:
                order = list(quote_rankings[i])
            elif text_embedder is not None:
                ranked = _text_rank(pool, as_vector(text_embedder(el.text)), str(i))
                order = [cid for cid, _ in ranked.ranked]
            else:
                order = sorted(pool.index)
            if el.resolved_clip_id in order:
                order.remove(el.resolved_clip_id)
            order.insert(0, el.resolved_clip_id)
            candidates = []
            for cid in order:
                clip = pool.clip(cid)
                duration = clip.duration_s
                candidates.append(
                    TimelineEntry(
                        kind="quote",
                        source_doc=clip.doc_id,
                        # start normalized through end - duration so the EDL
                        # round trip (which stores end and duration) is exact
                        start_s=clip.end_s - duration,
                        end_s=clip.end_s,
                        duration_s=duration,
                        text=clip.transcript,
                        clip_id=clip.clip_id,
                    )
                )
            entries.append(pick(candidates, f"quote element {i}"))

    return TeaserTimeline(doc_id=script.doc_id, entries=tuple(entries))


# ---------------------------------------------------------------------------
# EDL export
# ---------------------------------------------------------------------------

def export_timeline(timeline: TeaserTimeline, path) -> None:
    """Write the timeline as a CSV edit decision list; reimports losslessly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EDL_HEADER)
        for e in timeline.entries:
            clip_or_start = e.clip_id if e.kind == "quote" else repr(e.start_s)
            writer.writerow(
                [e.kind, e.source_doc, clip_or_start, repr(e.end_s), repr(e.duration_s), e.text]
            )


def load_timeline(path) -> TeaserTimeline:
    """Read an exported EDL back into a timeline.

    A header-only file yields an empty timeline with an empty doc_id (the
    format has no document column outside data rows).
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError("EDL file not found", path=path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or rows[0] != EDL_HEADER:
        raise ParseError(f"expected EDL header {','.join(EDL_HEADER)}", path=path, line=1)
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(EDL_HEADER):
            raise ParseError(f"expected {len(EDL_HEADER)} columns", path=path, line=lineno)
        kind, source_doc, clip_or_start, end_txt, dur_txt, text = row
        try:
            end_s, duration_s = float(end_txt), float(dur_txt)
        except ValueError:
            raise ParseError("bad EDL timestamps", path=path, line=lineno) from None
        if kind == "quote":
            entries.append(
                TimelineEntry(
                    kind="quote",
                    source_doc=source_doc,
                    start_s=end_s - duration_s,
                    end_s=end_s,
                    duration_s=duration_s,
                    text=text,
                    clip_id=clip_or_start,
                )
            )
        elif kind == "narration":
            try:
                start_s = float(clip_or_start)
            except ValueError:
                raise ParseError("bad narration start", path=path, line=lineno) from None
            entries.append(
                TimelineEntry(
                    kind="narration",
                    source_doc=source_doc,
                    start_s=start_s,
                    end_s=end_s,
                    duration_s=duration_s,
                    text=text,
                )
            )
        else:
            raise ParseError(f"unknown entry kind {kind!r}", path=path, line=lineno)
    doc_id = entries[0].source_doc if entries else ""
    return TeaserTimeline(doc_id=doc_id, entries=tuple(entries))
