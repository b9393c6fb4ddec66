"""Objective metrics: quote statistics, overlap ratio, ROUGE, and teaser measures."""

from __future__ import annotations

import csv
import string
from collections import Counter
from dataclasses import dataclass, fields
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .assembler import TeaserTimeline
from .embedding import TextEmbedder, as_vector, cosine_similarity
from .errors import DataError
from .script import Script, count_quotes


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokens with surrounding punctuation stripped."""
    out = []
    for tok in text.lower().split():
        tok = tok.strip(string.punctuation)
        if tok:
            out.append(tok)
    return out


# ---------------------------------------------------------------------------
# script metrics
# ---------------------------------------------------------------------------

def qdi(scripts: Sequence[Script]) -> float:
    """Quotation density index: mean quotes per script."""
    if not scripts:
        raise DataError("QDI needs at least one script")
    return sum(count_quotes(s) for s in scripts) / len(scripts)


def qcr(scripts: Sequence[Script]) -> float:
    """Quote coverage rate: percentage of scripts containing at least one quote."""
    if not scripts:
        raise DataError("QCR needs at least one script")
    covered = sum(1 for s in scripts if count_quotes(s) >= 1)
    return 100.0 * covered / len(scripts)


SpanMatcher = Callable[[str, Sequence[str]], int]


def nearest_interview_matcher(text_embedder: TextEmbedder) -> SpanMatcher:
    """Match a quoted span to its nearest interview by text-embedding cosine."""

    def matcher(span: str, interviews: Sequence[str]) -> int:
        sv = as_vector(text_embedder(span), "span embedding")
        best, best_score = 0, -np.inf
        for i, interview in enumerate(interviews):
            score = cosine_similarity(sv, text_embedder(interview))
            if score > best_score:
                best, best_score = i, score
        return best

    return matcher


def overlap_ratio(
    quoted_spans: Sequence[str],
    interview_base: Sequence[str],
    matcher: SpanMatcher,
) -> float:
    """Overlapping words between quoted spans and their matched interviews.

    Numerator: clipped multiset intersection of each span with its matched
    interview. Denominator: the matched interviews' word counts, one per
    span match, which bounds the ratio by 1.
    """
    if not quoted_spans:
        return 0.0
    if not interview_base:
        raise DataError("overlap ratio needs a non-empty interview base")
    overlap = 0
    matched_words = 0
    for span in quoted_spans:
        idx = matcher(span, interview_base)
        span_counts = Counter(tokenize(span))
        interview_counts = Counter(tokenize(interview_base[idx]))
        overlap += sum(min(c, interview_counts[t]) for t, c in span_counts.items())
        matched_words += sum(interview_counts.values())
    if matched_words == 0:
        return 0.0
    return overlap / matched_words


# ---------------------------------------------------------------------------
# ROUGE
# ---------------------------------------------------------------------------

def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def _lcs_length(xs: list[str], ys: list[str]) -> int:
    # single-row dynamic program
    if not xs or not ys:
        return 0
    row = [0] * (len(ys) + 1)
    for x in xs:
        prev = 0
        for j, y in enumerate(ys, start=1):
            cur = row[j]
            row[j] = prev + 1 if x == y else max(row[j], row[j - 1])
            prev = cur
    return row[-1]


def _f1(overlap: float, pred_total: int, ref_total: int) -> float:
    p = overlap / pred_total if pred_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def rouge(candidate: str, reference: str, variant) -> float:
    """ROUGE F1: clipped n-gram overlap for variants 1 and 2, LCS for "L"."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if variant in (1, 2):
        cg, rg = _ngrams(cand, variant), _ngrams(ref, variant)
        overlap = sum(min(c, rg[g]) for g, c in cg.items())
        return _f1(overlap, sum(cg.values()), sum(rg.values()))
    if variant in ("L", "l"):
        return _f1(_lcs_length(cand, ref), len(cand), len(ref))
    raise ValueError(f"unknown ROUGE variant {variant!r}")


# ---------------------------------------------------------------------------
# timeline metrics
# ---------------------------------------------------------------------------

FrameLookup = Mapping[tuple[str, int], np.ndarray]


def scene_change_rate(
    timeline: TeaserTimeline,
    frame_embeddings: FrameLookup,
    threshold: float = 0.9,
) -> float:
    """Scene transitions per frame pair, as a percentage.

    Counts consecutive-frame pairs inside narration entries whose cosine
    falls below the threshold, plus one transition at every entry boundary.
    A quote clip is a single scene internally.
    """
    frames = timeline.frames()
    if len(frames) < 2:
        raise DataError("scene change rate needs at least 2 frames")
    transitions = max(0, len(timeline.entries) - 1)
    for entry in timeline.entries:
        if entry.kind != "narration":
            continue
        keys = entry.frames()
        for a, b in zip(keys, keys[1:]):
            va, vb = frame_embeddings[a], frame_embeddings[b]
            if cosine_similarity(va, vb) < threshold:
                transitions += 1
    return 100.0 * transitions / (len(frames) - 1)


def repetitiveness(timeline: TeaserTimeline) -> float:
    """Percentage of frames whose (doc, second) identity appeared earlier."""
    frames = timeline.frames()
    if not frames:
        raise DataError("repetitiveness needs a non-empty timeline")
    seen: set[tuple[str, int]] = set()
    repeats = 0
    for key in frames:
        if key in seen:
            repeats += 1
        else:
            seen.add(key)
    return 100.0 * repeats / len(frames)


def interview_ratio(timeline: TeaserTimeline) -> float:
    """Percentage of teaser duration occupied by quote clips."""
    if not timeline.entries:
        raise DataError("interview ratio needs a non-empty timeline")
    quote_time = sum(e.duration_s for e in timeline.entries if e.kind == "quote")
    return 100.0 * quote_time / timeline.total_duration_s


def alignment_score(text_embedding, interval_frame_embeddings: Sequence) -> float:
    """Best cosine between one entry's text embedding and its interval frames."""
    if len(interval_frame_embeddings) == 0:
        raise DataError("alignment score needs at least one frame")
    t = as_vector(text_embedding, "text embedding")
    return max(cosine_similarity(t, f) for f in interval_frame_embeddings)


def clip_alignment_scores(
    timeline: TeaserTimeline,
    text_embedder: TextEmbedder,
    frame_embeddings: FrameLookup,
) -> tuple[Optional[float], Optional[float]]:
    """(quote-entry mean, narration-entry mean) of per-entry alignment scores.

    A side with no entries yields None rather than a fabricated value.
    """
    by_kind: dict[str, list[float]] = {"quote": [], "narration": []}
    for entry in timeline.entries:
        if not entry.text:
            raise DataError("alignment needs entry text")
        frames = [frame_embeddings[k] for k in entry.frames()]
        score = alignment_score(text_embedder(entry.text), frames)
        by_kind[entry.kind].append(score)
    mean = lambda xs: sum(xs) / len(xs) if xs else None
    return mean(by_kind["quote"]), mean(by_kind["narration"])


FrameMatcher = Callable[[tuple[str, int], Sequence[tuple[str, int]]], Sequence[tuple[str, int]]]


def top20_embedding_matcher(frame_embeddings: FrameLookup, k: int = 20) -> FrameMatcher:
    """Candidate screen: the k most embedding-similar target frames."""

    def matcher(frame, targets):
        v = frame_embeddings[frame]
        scored = sorted(
            targets,
            key=lambda t: (-cosine_similarity(v, frame_embeddings[t]), t),
        )
        return scored[:k]

    return matcher


def frame_f1(
    generated: TeaserTimeline,
    ground_truth: TeaserTimeline,
    matcher: Optional[FrameMatcher] = None,
) -> float:
    """Frame-level F1 between generated and ground-truth timelines, in percent.

    A generated frame is correct when its (doc, second) identity appears in
    the ground truth; with a matcher, the identity check is restricted to the
    matcher's top candidates (embedding screen, then exact identity).
    """
    gen = generated.frames()
    truth = ground_truth.frames()
    if not truth:
        raise DataError("frame F1 needs a non-empty ground truth")
    gen_set, truth_set = set(gen), set(truth)

    def correct(frames_set, target_set, targets):
        if matcher is None:
            return len(frames_set & target_set)
        return sum(1 for f in frames_set if f in set(matcher(f, targets)))

    if not gen_set:
        return 0.0
    tp_p = correct(gen_set, truth_set, sorted(truth_set))
    tp_r = correct(truth_set, gen_set, sorted(gen_set))
    precision = tp_p / len(gen_set)
    recall = tp_r / len(truth_set)
    if precision + recall == 0:
        return 0.0
    # 2*p is exact (power-of-two scale), so this expression is bit-symmetric
    # under swapping precision and recall; scaling by 100 must come last
    return 100.0 * (2 * precision * recall / (precision + recall))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class MetricReport:
    """Per-document metric values; None marks a metric that was not computable."""

    qdi: Optional[float] = None
    qcr_pct: Optional[float] = None
    overlap_ratio: Optional[float] = None
    rouge1_f1: Optional[float] = None
    rouge2_f1: Optional[float] = None
    rougeL_f1: Optional[float] = None
    scr_pct: Optional[float] = None
    rep_pct: Optional[float] = None
    interview_ratio_pct: Optional[float] = None
    clips_i: Optional[float] = None
    clips_n: Optional[float] = None
    frame_f1_pct: Optional[float] = None
    duration_s: Optional[float] = None


REPORT_FIELDS = [f.name for f in fields(MetricReport)]


def mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean over documents, per field, ignoring missing values."""
    out = MetricReport()
    for name in REPORT_FIELDS:
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if values:
            setattr(out, name, sum(values) / len(values))
    return out


def write_report_csv(path, reports: Mapping[str, MetricReport]) -> None:
    """One row per document (sorted by id) plus a final MEAN row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id"] + REPORT_FIELDS)

        def row(doc_id: str, report: MetricReport) -> list[str]:
            cells = [doc_id]
            for name in REPORT_FIELDS:
                v = getattr(report, name)
                cells.append("" if v is None else repr(float(v)))
            return cells

        ordered = sorted(reports)
        for doc_id in ordered:
            writer.writerow(row(doc_id, reports[doc_id]))
        writer.writerow(row("MEAN", mean_report([reports[d] for d in ordered])))
