"""Clip-fitness ranking, top-k retrieval, negative sampling, and quote fulfillment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import ClipRecord
from .embedding import (
    FusionHead,
    QueryEncoder,
    TextEmbedder,
    as_vector,
    cosine_similarity,
    encode_query,
    fuse,
)
from .errors import DataError, ParseError
from .script import DQ, DirectQuote, Narration, QuotePlaceholder, Script

VARIANTS = ("T", "TV")


@dataclass
class CandidatePool:
    """Immutable pool of quotable clips with their retrieval embeddings.

    For the text-only variant e_m is the clip's text embedding verbatim; for
    text+visual e_m is the fusion head's output over [text || 3 frames].
    """

    clips: tuple[ClipRecord, ...]
    variant: str
    matrix: np.ndarray                      # (M, d) rows aligned with clips
    index: dict[str, int] = field(repr=False)

    def __post_init__(self):
        self.matrix.setflags(write=False)

    def __len__(self) -> int:
        return len(self.clips)

    def clip(self, clip_id: str) -> ClipRecord:
        return self.clips[self.index[clip_id]]

    def embedding_of(self, clip_id: str) -> np.ndarray:
        return self.matrix[self.index[clip_id]]

    @property
    def doc_ids(self) -> list[str]:
        return sorted({c.doc_id for c in self.clips})


@dataclass(frozen=True)
class RetrievalResult:
    """Descending fitness ranking for one query."""

    query_id: str
    ranked: tuple[tuple[str, float], ...]

    def __post_init__(self):
        scores = [s for _, s in self.ranked]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("ranking scores must be non-increasing")
        ids = [cid for cid, _ in self.ranked]
        if len(set(ids)) != len(ids):
            raise ValueError("ranking contains duplicate clip ids")

    @property
    def top(self) -> str:
        return self.ranked[0][0]


def build_pool(
    clips: Sequence[ClipRecord],
    head: Optional[FusionHead] = None,
    variant: str = "T",
) -> CandidatePool:
    """Compute e_m once per clip and freeze the pool.

    Rejects missing embeddings, dimension disagreements, and zero-norm
    results (cosine fitness would be undefined).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown retrieval variant {variant!r}")
    if not clips:
        raise DataError("cannot build an empty candidate pool")
    ids = [c.clip_id for c in clips]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate clip_id in pool")

    rows = []
    for clip in clips:
        if clip.text_embedding is None:
            raise DataError(f"clip {clip.clip_id} lacks a text embedding")
        if variant == "T":
            e_m = as_vector(clip.text_embedding, f"clip {clip.clip_id} text embedding")
        else:
            if head is None:
                raise DataError("TV pool requires a fusion head")
            if clip.frame_embeddings is None:
                raise DataError(f"clip {clip.clip_id} lacks frame embeddings")
            e_m = fuse(head, clip.text_embedding, clip.frame_embeddings)
        if float(np.linalg.norm(e_m)) == 0.0:
            raise DataError(
                f"clip {clip.clip_id} produced a zero-norm embedding; pool rejected"
            )
        rows.append(e_m)
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise DataError(f"pool embeddings disagree on dimension: {sorted(dims)}")
    return CandidatePool(
        clips=tuple(clips), variant=variant, matrix=np.stack(rows),
        index={cid: i for i, cid in enumerate(ids)},
    )


def clip_fitness(h, e_m) -> float:
    """Clip fitness: cosine similarity between query h and candidate e_m."""
    return cosine_similarity(h, e_m)


def retrieve_top_k(h, pool: CandidatePool, k: int, query_id: str = "") -> RetrievalResult:
    """Exact top-k by clip fitness; ties break to the ascending clip_id.

    Scores come from the same per-row dot-product arithmetic as
    cosine_similarity, so full-scan comparisons are bit-exact.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(pool) == 0:
        raise DataError("cannot retrieve from an empty pool")
    hv = as_vector(h, "query")
    if hv.shape[0] != pool.matrix.shape[1]:
        raise ValueError(
            f"query dim {hv.shape[0]} does not match pool dim {pool.matrix.shape[1]}"
        )
    hn = float(np.linalg.norm(hv))
    if hn == 0.0:
        raise ValueError("query has zero norm")
    scores = []
    for i in range(len(pool)):
        row = pool.matrix[i]
        scores.append(float(np.dot(row, hv) / (float(np.linalg.norm(row)) * hn)))
    order = sorted(range(len(pool)), key=lambda i: (-scores[i], pool.clips[i].clip_id))
    top = order[: min(k, len(pool))]
    return RetrievalResult(
        query_id=query_id,
        ranked=tuple((pool.clips[i].clip_id, scores[i]) for i in top),
    )


def recall_at_k(
    results: Sequence[RetrievalResult], truth: dict[str, str], k: int
) -> float:
    """Fraction of queries whose true clip appears in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not results:
        raise DataError("recall needs at least one retrieval result")
    hits = 0
    for r in results:
        if r.query_id not in truth:
            raise DataError(f"query {r.query_id!r} has no truth entry")
        wanted = truth[r.query_id]
        if any(cid == wanted for cid, _ in r.ranked[:k]):
            hits += 1
    return hits / len(results)


def group_sample_negatives(
    batch,
    pool: CandidatePool,
    fraction: float,
    n_neg: int,
    seed: int,
) -> list[list[str]]:
    """Per-sample negative clip ids: hard same-documentary first, cross-doc fill.

    Each sample draws ceil(fraction * n_neg) negatives from its own
    documentary (capped by supply, never the positive), topped up from other
    documentaries. Sampling is without replacement and fully determined by
    the seed.
    """
    if n_neg < 1:
        raise ValueError("n_neg must be >= 1")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    if len(pool) < n_neg + 1:
        raise DataError(
            f"pool of {len(pool)} clips cannot supply {n_neg} negatives plus a positive"
        )
    by_doc: dict[str, list[str]] = {}
    for c in pool.clips:
        by_doc.setdefault(c.doc_id, []).append(c.clip_id)
    for ids in by_doc.values():
        ids.sort()

    rng = np.random.default_rng(seed)
    out: list[list[str]] = []
    for sample in batch:
        if sample.positive_clip_id not in pool.index:
            raise DataError(f"positive clip {sample.positive_clip_id} missing from pool")
        same = [c for c in by_doc.get(sample.doc_id, []) if c != sample.positive_clip_id]
        cross = [
            cid
            for doc in sorted(by_doc)
            if doc != sample.doc_id
            for cid in by_doc[doc]
        ]
        n_same = min(math.ceil(fraction * n_neg), len(same))
        n_cross = min(n_neg - n_same, len(cross))
        shortfall = n_neg - n_same - n_cross  # cross-doc supply exhausted
        n_same += shortfall

        picked: list[str] = []
        if n_same:
            picked += [same[i] for i in rng.choice(len(same), size=n_same, replace=False)]
        if n_cross:
            picked += [
                cross[i] for i in rng.choice(len(cross), size=n_cross, replace=False)
            ]
        out.append(picked)
    return out


@dataclass(frozen=True)
class QuoteResolution:
    """Audit record for one fulfilled quote."""

    element_index: int
    ranking: RetrievalResult


def _nearest_narrations(script: Script, idx: int) -> tuple[str, str]:
    prev = ""
    for el in reversed(script.elements[:idx]):
        if isinstance(el, Narration):
            prev = el.text
            break
    nxt = ""
    for el in script.elements[idx + 1:]:
        if isinstance(el, Narration):
            nxt = el.text
            break
    return prev, nxt


def _text_rank(pool: CandidatePool, query_vec: np.ndarray, query_id: str) -> RetrievalResult:
    """Full ranking of pool clips by text-embedding similarity to a vector."""
    scores = []
    for c in pool.clips:
        if c.text_embedding is None:
            raise DataError(f"clip {c.clip_id} lacks a text embedding")
        scores.append(cosine_similarity(query_vec, c.text_embedding))
    order = sorted(range(len(pool)), key=lambda i: (-scores[i], pool.clips[i].clip_id))
    return RetrievalResult(
        query_id=query_id,
        ranked=tuple((pool.clips[i].clip_id, scores[i]) for i in order),
    )


def fulfill_quotes_audited(
    script: Script,
    pool: CandidatePool,
    encoder: Optional[QueryEncoder],
    head: Optional[FusionHead],
    text_embedder: TextEmbedder,
    audit_k: int = 10,
) -> tuple[Script, list[QuoteResolution]]:
    """fulfill_quotes plus the per-quote fitness rankings for audit output."""
    if len(pool) == 0:
        raise DataError("cannot fulfill quotes from an empty pool")
    if head is not None and encoder is not None and head.out_dim != encoder.out_dim:
        raise DataError("fusion head and query encoder disagree on output dim")

    elements = list(script.elements)
    audits: list[QuoteResolution] = []
    for i, el in enumerate(elements):
        if isinstance(el, QuotePlaceholder):
            if encoder is None:
                raise DataError("placeholder fulfillment requires a query encoder")
            prev, nxt = _nearest_narrations(script, i)
            if not prev and not nxt:
                raise DataError(
                    f"element {i}: placeholder has no surrounding narration"
                )
            h = encode_query(encoder, prev, nxt, text_embedder)
            ranking = retrieve_top_k(
                h, pool, min(audit_k, len(pool)), query_id=f"{script.doc_id}#{i}"
            )
            clip = pool.clip(ranking.top)
            elements[i] = DirectQuote(text=clip.transcript, resolved_clip_id=clip.clip_id)
            audits.append(QuoteResolution(element_index=i, ranking=ranking))
        elif isinstance(el, DirectQuote) and el.resolved_clip_id is None:
            qv = as_vector(text_embedder(el.text), "quote embedding")
            full = _text_rank(pool, qv, query_id=f"{script.doc_id}#{i}")
            ranking = RetrievalResult(
                query_id=full.query_id, ranked=full.ranked[: min(audit_k, len(pool))]
            )
            elements[i] = DirectQuote(text=el.text, resolved_clip_id=ranking.top)
            audits.append(QuoteResolution(element_index=i, ranking=ranking))
    return (
        Script(doc_id=script.doc_id, elements=tuple(elements), encoding=DQ),
        audits,
    )


def fulfill_quotes(
    script: Script,
    pool: CandidatePool,
    encoder: Optional[QueryEncoder],
    head: Optional[FusionHead],
    text_embedder: TextEmbedder,
) -> Script:
    """Resolve every quote in the script against the candidate pool.

    Placeholders retrieve by query encoding over their nearest surrounding
    narrations; unresolved direct quotes match their body's nearest
    text-embedding neighbor. Element count and order are preserved; the
    result is DQ-encoded (every quote now carries text and a clip id).
    """
    fulfilled, _ = fulfill_quotes_audited(script, pool, encoder, head, text_embedder)
    return fulfilled


# ---------------------------------------------------------------------------
# pool files
# ---------------------------------------------------------------------------

def write_clip_file(path, clips: Sequence[ClipRecord]) -> None:
    """Clip metadata TSV: clip_id, doc_id, start_s, end_s, transcript."""
    lines = []
    for c in clips:
        if "\t" in c.transcript or "\n" in c.transcript:
            raise ValueError(f"clip {c.clip_id}: transcript cannot contain tabs/newlines")
        lines.append(
            "\t".join((c.clip_id, c.doc_id, repr(c.start_s), repr(c.end_s), c.transcript))
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_clip_file(path) -> list[ClipRecord]:
    path = Path(path)
    if not path.is_file():
        raise ParseError("clip file not found", path=path)
    clips = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        fields = raw.split("\t")
        if len(fields) != 5:
            raise ParseError(
                f"expected 5 tab-separated fields, got {len(fields)}",
                path=path, line=lineno,
            )
        clip_id, doc_id, start_txt, end_txt, transcript = fields
        try:
            start_s, end_s = float(start_txt), float(end_txt)
        except ValueError:
            raise ParseError("bad clip timestamps", path=path, line=lineno) from None
        clips.append(ClipRecord(clip_id, doc_id, start_s, end_s, transcript))
    return clips


def attach_embeddings(
    clips: Sequence[ClipRecord],
    text_vectors: dict[str, np.ndarray],
    frame_vectors: Optional[dict[str, np.ndarray]] = None,
) -> list[ClipRecord]:
    """Cross-reference embedding files onto clip records by id.

    Text vectors are keyed by clip_id; frame vectors by `<clip_id>.f0/.f1/.f2`.
    """
    out = []
    for c in clips:
        if c.clip_id not in text_vectors:
            raise DataError(f"no text embedding for clip {c.clip_id}")
        frames = None
        if frame_vectors is not None:
            try:
                frames = tuple(frame_vectors[f"{c.clip_id}.f{j}"] for j in range(3))
            except KeyError as exc:
                raise DataError(f"missing frame embedding {exc} for clip {c.clip_id}")
        out.append(
            ClipRecord(
                clip_id=c.clip_id,
                doc_id=c.doc_id,
                start_s=c.start_s,
                end_s=c.end_s,
                transcript=c.transcript,
                text_embedding=text_vectors[c.clip_id],
                frame_embeddings=frames,
            )
        )
    return out
