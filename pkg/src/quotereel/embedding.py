"""Vector arithmetic, the fusion head, the query encoder, and retrieval training.

The fusion head is a two-layer perceptron mapping concatenated clip features
(text embedding plus three frame embeddings) into the retrieval space. The
query encoder is a linear projection of the concatenated surrounding-narration
embeddings standing in for a full sequence model at desk scale. Training
minimizes a contrastive retrieval loss over cosine clip-fitness scores with
hand-derived analytic gradients, so every step is finite-difference checkable.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError, ParseError

# Fixed project-wide nonlinearity for the fusion head. tanh is smooth
# everywhere, which keeps central-difference gradient checks valid.
ACTIVATION_NAME = "tanh"

TextEmbedder = Callable[[str], np.ndarray]


# ---------------------------------------------------------------------------
# vectors
# ---------------------------------------------------------------------------

def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array with positive dimension."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def cosine_similarity(a, b) -> float:
    """Standard cosine similarity in [-1, 1]; rejects zero-norm vectors."""
    va = as_vector(a, "a")
    vb = as_vector(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise ValueError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    return float(np.dot(va, vb) / (na * nb))


def substream_seed(seed: int, label: str) -> int:
    """Derive a named sub-seed so pipeline stages can be re-run independently."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def hash_text_embedder(dim: int, seed: int = 0) -> TextEmbedder:
    """Deterministic text embedder: seeded hash of the text, unit-normalized.

    Desk-scale stand-in for a sentence encoder; distinct texts land on
    near-orthogonal directions with overwhelming probability.
    """
    if dim < 1:
        raise ValueError("embedding dim must be >= 1")

    def embed(text: str) -> np.ndarray:
        rng = np.random.default_rng(substream_seed(seed, f"text:{text}"))
        v = rng.standard_normal(dim)
        return v / np.linalg.norm(v)

    return embed


def _require_finite_params(name: str, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} has non-finite parameters")


# ---------------------------------------------------------------------------
# trainable modules
# ---------------------------------------------------------------------------

def _uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class FusionHead:
    """Two-layer perceptron fusing text and frame embeddings into clip space."""

    w1: np.ndarray  # (in_dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, out_dim)
    b2: np.ndarray  # (out_dim,)

    @classmethod
    def create(
        cls,
        in_dim: int,
        out_dim: int,
        hidden_dim: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> "FusionHead":
        if hidden_dim is None:
            hidden_dim = in_dim
        rng = rng if rng is not None else np.random.default_rng(0)
        return cls(
            w1=_uniform_init(rng, in_dim, (in_dim, hidden_dim)),
            b1=_uniform_init(rng, in_dim, (hidden_dim,)),
            w2=_uniform_init(rng, hidden_dim, (hidden_dim, out_dim)),
            b2=_uniform_init(rng, hidden_dim, (out_dim,)),
        )

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def copy(self) -> "FusionHead":
        return FusionHead(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


def _head_forward(head: FusionHead, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass over rows of x; returns (outputs, hidden activations)."""
    a1 = np.tanh(x @ head.w1 + head.b1)
    return a1 @ head.w2 + head.b2, a1


def fuse(head: FusionHead, e_text, frames: Sequence) -> np.ndarray:
    """Fused clip embedding from a text embedding plus three frame embeddings.

    Features concatenate in the fixed order [text, frame1, frame2, frame3].
    """
    _require_finite_params("fusion head", head.w1, head.b1, head.w2, head.b2)
    if len(frames) != 3:
        raise ValueError(f"expected exactly 3 frame embeddings, got {len(frames)}")
    parts = [as_vector(e_text, "text embedding")]
    parts += [as_vector(f, f"frame embedding {i}") for i, f in enumerate(frames)]
    x = np.concatenate(parts)
    if x.shape[0] != head.in_dim:
        raise ValueError(
            f"fusion input dim {x.shape[0]} does not match head in_dim {head.in_dim}"
        )
    out, _ = _head_forward(head, x[None, :])
    return out[0]


@dataclass
class QueryEncoder:
    """Linear projection of [prev-narration ; next-narration] embeddings."""

    w: np.ndarray  # (2 * text_dim, out_dim)
    b: np.ndarray  # (out_dim,)
    max_context_tokens: int = 128
    sum_token_position: str = "end"  # "end" = [prev || next], "start" = [next || prev]

    def __post_init__(self):
        if self.w.shape[0] % 2 != 0:
            raise ValueError("query projection input dim must be even (two text sides)")
        if self.max_context_tokens < 1:
            raise ValueError("max_context_tokens must be >= 1")
        if self.sum_token_position not in ("start", "end"):
            raise ValueError(f"unknown sum_token_position {self.sum_token_position!r}")

    @classmethod
    def create(
        cls,
        text_dim: int,
        out_dim: int,
        rng: Optional[np.random.Generator] = None,
        max_context_tokens: int = 128,
        sum_token_position: str = "end",
    ) -> "QueryEncoder":
        rng = rng if rng is not None else np.random.default_rng(0)
        return cls(
            w=_uniform_init(rng, 2 * text_dim, (2 * text_dim, out_dim)),
            b=_uniform_init(rng, 2 * text_dim, (out_dim,)),
            max_context_tokens=max_context_tokens,
            sum_token_position=sum_token_position,
        )

    @property
    def text_dim(self) -> int:
        return self.w.shape[0] // 2

    @property
    def out_dim(self) -> int:
        return self.w.shape[1]

    def copy(self) -> "QueryEncoder":
        return QueryEncoder(
            self.w.copy(), self.b.copy(), self.max_context_tokens, self.sum_token_position
        )


def _truncate_context(prev: str, next_: str, budget: int) -> tuple[str, str]:
    """Fit both sides into `budget` whitespace tokens.

    The prev side loses tokens from its left first (keeping the words nearest
    the placeholder); only if prev is exhausted does next lose tokens from
    its right.
    """
    pt, nt = prev.split(), next_.split()
    over = len(pt) + len(nt) - budget
    if over > 0:
        drop = min(over, len(pt))
        pt = pt[drop:]
        over -= drop
        if over > 0:
            nt = nt[: len(nt) - over]
    return " ".join(pt), " ".join(nt)


def build_query_input(
    encoder: QueryEncoder, prev: str, next_: str, text_embedder: TextEmbedder
) -> np.ndarray:
    """Raw encoder input for a (prev, next) narration pair.

    An empty side contributes a zero vector. Raises when both sides are empty.
    """
    if not prev.strip() and not next_.strip():
        raise DataError("query needs at least one non-empty narration side")
    t = encoder.text_dim
    prev_t, next_t = _truncate_context(prev, next_, encoder.max_context_tokens)

    def side(text: str) -> np.ndarray:
        if not text:
            return np.zeros(t)
        v = as_vector(text_embedder(text), "text embedding")
        if v.shape[0] != t:
            raise ValueError(f"text embedder dim {v.shape[0]} != encoder text dim {t}")
        return v

    ep, en = side(prev_t), side(next_t)
    if encoder.sum_token_position == "start":
        return np.concatenate([en, ep])
    return np.concatenate([ep, en])


def encode_query(
    encoder: QueryEncoder, prev: str, next_: str, text_embedder: TextEmbedder
) -> np.ndarray:
    """Query embedding h for a placeholder flanked by prev/next narrations."""
    _require_finite_params("query encoder", encoder.w, encoder.b)
    x = build_query_input(encoder, prev, next_, text_embedder)
    return x @ encoder.w + encoder.b


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + math.log(float(np.sum(np.exp(values - m))))


def retrieval_loss(
    queries: Sequence,
    positives: Sequence,
    negative_sets: Sequence[Sequence],
    include_pos: bool = False,
) -> float:
    """Contrastive retrieval loss over cosine scores.

    Per placeholder k the loss is -log of exp(cos(h_k, e*_k)) over the sum of
    exp(cos(h_k, e_j)) for e_j in the denominator set: the negatives alone by
    default, or negatives plus the positive when include_pos is set. Computed
    through a stable log-sum-exp.
    """
    if not (len(queries) == len(positives) == len(negative_sets)):
        raise ValueError("queries, positives, and negative sets must align")
    total = 0.0
    for k, (h, pos, negs) in enumerate(zip(queries, positives, negative_sets)):
        if len(negs) == 0:
            raise ValueError(f"placeholder {k}: empty negative set")
        s_pos = cosine_similarity(h, pos)
        sims = [cosine_similarity(h, e) for e in negs]
        if include_pos:
            sims.append(s_pos)
        total += -s_pos + _logsumexp(np.asarray(sims))
    return total


def l2_retrieval_loss(queries: Sequence, positives: Sequence) -> float:
    """Sum of squared distances between queries and their positives."""
    if len(queries) != len(positives):
        raise ValueError("queries and positives must align")
    total = 0.0
    for h, pos in zip(queries, positives):
        vh = as_vector(h, "query")
        vp = as_vector(pos, "positive")
        if vh.shape[0] != vp.shape[0]:
            raise ValueError("dimension mismatch between query and positive")
        diff = vh - vp
        total += float(diff @ diff)
    return total


def total_loss(l_gen: float, l_ret: float, alpha: float) -> float:
    """Multitask total: generation loss plus alpha-weighted retrieval loss."""
    for name, v in (("l_gen", l_gen), ("l_ret", l_ret), ("alpha", alpha)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    return l_gen + alpha * l_ret


# ---------------------------------------------------------------------------
# analytic gradients
# ---------------------------------------------------------------------------

@dataclass
class RetrievalBatch:
    """One training batch in index form.

    clip_features rows are fusion inputs ([text||3 frames]) when a head is
    trained, or final clip embeddings when the pool is text-only. Negative
    row arrays must not repeat indices within one sample.
    """

    query_inputs: np.ndarray          # (K, 2 * text_dim)
    clip_features: np.ndarray         # (N, feature_dim)
    positive_rows: np.ndarray         # (K,)
    negative_rows: list[np.ndarray]   # K arrays of row indices


@dataclass
class ParamGrads:
    d_qw: np.ndarray
    d_qb: np.ndarray
    d_w1: Optional[np.ndarray] = None
    d_b1: Optional[np.ndarray] = None
    d_w2: Optional[np.ndarray] = None
    d_b2: Optional[np.ndarray] = None


def _batch_forward(
    batch: RetrievalBatch, encoder: QueryEncoder, head: Optional[FusionHead]
):
    H = batch.query_inputs @ encoder.w + encoder.b
    if head is not None:
        E, A1 = _head_forward(head, batch.clip_features)
    else:
        E, A1 = batch.clip_features, None
    Hn = np.linalg.norm(H, axis=1)
    En = np.linalg.norm(E, axis=1)
    if np.any(Hn == 0.0) or np.any(En == 0.0):
        raise DataError("zero-norm embedding encountered; cosine is undefined")
    return H, E, A1, Hn, En


def grad_retrieval_loss(
    batch: RetrievalBatch,
    encoder: QueryEncoder,
    head: Optional[FusionHead] = None,
    include_pos: bool = False,
    loss_kind: str = "contrastive",
) -> tuple[float, ParamGrads]:
    """Loss value and exact analytic gradients for every trainable parameter.

    Backpropagates through the cosine scores, the softmax denominator, the
    two-layer fusion forward pass, and the query projection. Matches
    central finite differences; see the gradient-check tests.
    """
    if loss_kind not in ("contrastive", "l2"):
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    K = batch.query_inputs.shape[0]
    if K != len(batch.positive_rows) or K != len(batch.negative_rows):
        raise ValueError("batch arrays must align on the sample axis")

    H, E, A1, Hn, En = _batch_forward(batch, encoder, head)
    dH = np.zeros_like(H)
    dE = np.zeros_like(E)
    loss = 0.0

    for k in range(K):
        h = H[k]
        hn = Hn[k]
        pos = int(batch.positive_rows[k])
        if loss_kind == "l2":
            diff = h - E[pos]
            loss += float(diff @ diff)
            dH[k] += 2.0 * diff
            dE[pos] -= 2.0 * diff
            continue

        negs = batch.negative_rows[k]
        if len(negs) == 0:
            raise ValueError(f"sample {k}: empty negative set")
        rows = np.concatenate([negs, [pos]]) if include_pos else np.asarray(negs)
        Ed = E[rows]
        end = En[rows]
        dots = Ed @ h
        sims = dots / (end * hn)
        lse = _logsumexp(sims)
        s_pos = float(np.dot(E[pos], h) / (En[pos] * hn))
        loss += -s_pos + lse

        # dL/dsims = softmax weights; the positive score carries an extra -1
        p = np.exp(sims - lse)
        inv = 1.0 / (hn * end)
        # cosine backward, vectorized over the denominator rows:
        #   dc/dh = e/(|h||e|) - (h.e) h / (|h|^3 |e|)
        #   dc/de = h/(|h||e|) - (h.e) e / (|h| |e|^3)
        dH[k] += Ed.T @ (p * inv) - h * (float(np.sum(p * dots * inv)) / (hn * hn))
        dE[rows] += np.outer(p * inv, h) - (p * dots * inv / (end * end))[:, None] * Ed

        e_pos = E[pos]
        en_pos = En[pos]
        dot_pos = float(np.dot(e_pos, h))
        dH[k] -= e_pos / (hn * en_pos) - dot_pos * h / (hn ** 3 * en_pos)
        dE[pos] -= h / (hn * en_pos) - dot_pos * e_pos / (hn * en_pos ** 3)

    grads = ParamGrads(
        d_qw=batch.query_inputs.T @ dH,
        d_qb=dH.sum(axis=0),
    )
    if head is not None:
        dA1 = dE @ head.w2.T
        dZ1 = dA1 * (1.0 - A1 * A1)
        grads.d_w2 = A1.T @ dE
        grads.d_b2 = dE.sum(axis=0)
        grads.d_w1 = batch.clip_features.T @ dZ1
        grads.d_b1 = dZ1.sum(axis=0)
    return loss, grads


def batch_retrieval_loss(
    batch: RetrievalBatch,
    encoder: QueryEncoder,
    head: Optional[FusionHead] = None,
    include_pos: bool = False,
    loss_kind: str = "contrastive",
) -> float:
    """Forward-only loss for a batch (used for validation and grad checks)."""
    H, E, _, Hn, En = _batch_forward(batch, encoder, head)
    total = 0.0
    for k in range(batch.query_inputs.shape[0]):
        h, hn = H[k], Hn[k]
        pos = int(batch.positive_rows[k])
        if loss_kind == "l2":
            diff = h - E[pos]
            total += float(diff @ diff)
            continue
        negs = batch.negative_rows[k]
        rows = np.concatenate([negs, [pos]]) if include_pos else np.asarray(negs)
        sims = (E[rows] @ h) / (En[rows] * hn)
        s_pos = float(np.dot(E[pos], h) / (En[pos] * hn))
        total += -s_pos + _logsumexp(sims)
    return total


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    """Hyperparameters for joint fusion-head and query-encoder training."""

    alpha: float = 1.0
    learning_rate: float = 1e-5
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 30
    seed: int = 0
    same_doc_negative_fraction: float = 0.3
    loss_kind: str = "contrastive"
    include_positive_in_denominator: bool = False
    sum_token_position: str = "end"
    max_context_tokens: int = 128
    hidden_dim: Optional[int] = None
    validation_fraction: float = 0.1
    l_gen: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.same_doc_negative_fraction <= 1.0:
            raise ValueError("same_doc_negative_fraction must be in [0, 1]")
        if not 0.0 <= self.validation_fraction <= 1.0:
            raise ValueError("validation_fraction must be in [0, 1]")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise ValueError("batch_size/max_epochs must be >= 1 and patience >= 0")
        if self.loss_kind not in ("contrastive", "l2"):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        if self.sum_token_position not in ("start", "end"):
            raise ValueError(f"unknown sum_token_position {self.sum_token_position!r}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    best_val: float


@dataclass
class TrainResult:
    head: Optional[FusionHead]
    encoder: QueryEncoder
    history: list[EpochStats]

    @property
    def best_val(self) -> float:
        return self.history[-1].best_val


def _split_by_documentary(samples, fraction: float, rng: np.random.Generator):
    """Validation split that never places one documentary on both sides."""
    if fraction <= 0.0:
        return list(range(len(samples))), []
    by_doc: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_doc.setdefault(s.doc_id, []).append(i)
    docs = sorted(by_doc)
    if len(docs) < 2:
        return list(range(len(samples))), []
    order = [docs[i] for i in rng.permutation(len(docs))]
    target = fraction * len(samples)
    val_docs: list[str] = []
    count = 0
    for doc in order:
        if len(val_docs) + 1 == len(docs):
            break  # keep at least one training documentary
        val_docs.append(doc)
        count += len(by_doc[doc])
        if count >= target:
            break
    val = sorted(i for d in val_docs for i in by_doc[d])
    train = sorted(set(range(len(samples))) - set(val))
    return train, val


def _make_batch(
    sample_indices,
    samples,
    query_inputs: np.ndarray,
    features: np.ndarray,
    row_of: dict[str, int],
    negatives_by_sample,
) -> RetrievalBatch:
    positive_rows = np.array(
        [row_of[samples[i].positive_clip_id] for i in sample_indices], dtype=np.intp
    )
    negative_rows = [
        np.array([row_of[cid] for cid in negatives_by_sample[j]], dtype=np.intp)
        for j in range(len(sample_indices))
    ]
    return RetrievalBatch(
        query_inputs=query_inputs[np.asarray(sample_indices, dtype=np.intp)],
        clip_features=features,
        positive_rows=positive_rows,
        negative_rows=negative_rows,
    )


def train(
    head: Optional[FusionHead],
    encoder: QueryEncoder,
    samples,
    pool,
    config: TrainConfig,
    text_embedder: TextEmbedder,
) -> TrainResult:
    """SGD on the retrieval loss with early stopping.

    Deterministic for a fixed config seed: sample shuffling, negative
    sampling, and the validation split all draw from named sub-seeds.
    Stops once the monitored loss fails to improve for `patience`
    consecutive epochs (patience=0 runs exactly one epoch).
    """
    from .retriever import group_sample_negatives  # deferred: avoids module cycle

    samples = list(samples)
    if not samples:
        raise DataError("no training samples")
    for s in samples:
        if s.positive_clip_id not in pool.index:
            raise DataError(f"positive clip {s.positive_clip_id} missing from pool")

    head = head.copy() if head is not None else None
    encoder = encoder.copy()

    # precompute per-sample query inputs and the full clip feature matrix
    query_inputs = np.stack(
        [
            build_query_input(encoder, s.prev_narration, s.next_narration, text_embedder)
            for s in samples
        ]
    )
    if head is not None:
        feats = []
        for clip in pool.clips:
            if clip.text_embedding is None or clip.frame_embeddings is None:
                raise DataError(f"clip {clip.clip_id} lacks embeddings for fusion")
            feats.append(np.concatenate([clip.text_embedding, *clip.frame_embeddings]))
        features = np.stack(feats)
    else:
        features = np.stack([c.text_embedding for c in pool.clips])
    row_of = {c.clip_id: i for i, c in enumerate(pool.clips)}

    n_neg = config.batch_size - 1
    if n_neg < 1:
        raise DataError("batch_size must be >= 2 to yield in-batch negatives")

    split_rng = np.random.default_rng(substream_seed(config.seed, "split"))
    train_idx, val_idx = _split_by_documentary(
        samples, config.validation_fraction, split_rng
    )
    if not train_idx:
        train_idx, val_idx = list(range(len(samples))), []

    val_batch = None
    if val_idx:
        val_negs = group_sample_negatives(
            [samples[i] for i in val_idx],
            pool,
            config.same_doc_negative_fraction,
            n_neg,
            substream_seed(config.seed, "valneg"),
        )
        val_batch = _make_batch(
            val_idx, samples, query_inputs, features, row_of, val_negs
        )

    lr = config.learning_rate
    history: list[EpochStats] = []
    best = math.inf
    streak = 0

    for epoch in range(1, config.max_epochs + 1):
        order_rng = np.random.default_rng(substream_seed(config.seed, f"shuffle:{epoch}"))
        order = [train_idx[i] for i in order_rng.permutation(len(train_idx))]

        epoch_ret = 0.0
        for b, lo in enumerate(range(0, len(order), config.batch_size)):
            chunk = order[lo: lo + config.batch_size]
            negs = group_sample_negatives(
                [samples[i] for i in chunk],
                pool,
                config.same_doc_negative_fraction,
                n_neg,
                substream_seed(config.seed, f"neg:{epoch}:{b}"),
            )
            batch = _make_batch(chunk, samples, query_inputs, features, row_of, negs)
            loss, grads = grad_retrieval_loss(
                batch,
                encoder,
                head,
                include_pos=config.include_positive_in_denominator,
                loss_kind=config.loss_kind,
            )
            epoch_ret += loss
            step = lr * config.alpha
            if step != 0.0:
                encoder.w -= step * grads.d_qw
                encoder.b -= step * grads.d_qb
                if head is not None:
                    head.w1 -= step * grads.d_w1
                    head.b1 -= step * grads.d_b1
                    head.w2 -= step * grads.d_w2
                    head.b2 -= step * grads.d_b2

        train_total = total_loss(config.l_gen, epoch_ret, config.alpha)
        if val_batch is not None:
            val_ret = batch_retrieval_loss(
                val_batch,
                encoder,
                head,
                include_pos=config.include_positive_in_denominator,
                loss_kind=config.loss_kind,
            )
            val_total = total_loss(config.l_gen, val_ret, config.alpha)
        else:
            val_total = train_total

        if val_total < best:
            best = val_total
            streak = 0
        else:
            streak += 1
        history.append(EpochStats(epoch, train_total, val_total, best))
        if streak >= config.patience:
            break

    return TrainResult(head=head, encoder=encoder, history=history)


# ---------------------------------------------------------------------------
# embedding file format
# ---------------------------------------------------------------------------

def read_embedding_file(path) -> dict[str, np.ndarray]:
    """Load an embedding file: `#dim=<d> count=<n>` header, then id<TAB>values."""
    path = Path(path)
    if not path.is_file():
        raise ParseError("embedding file not found", path=path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty embedding file", path=path)
    m = re.match(r"^#dim=(\d+) count=(\d+)$", lines[0])
    if not m:
        raise ParseError("expected '#dim=<d> count=<n>' header", path=path, line=1)
    dim, count = int(m.group(1)), int(m.group(2))
    if dim < 1:
        raise ParseError("dim must be >= 1", path=path, line=1)
    vectors: dict[str, np.ndarray] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.split("\t")
        if len(parts) != 2:
            raise ParseError("expected id<TAB>values", path=path, line=lineno)
        vid, values = parts
        if not vid or any(ch.isspace() for ch in vid):
            raise ParseError(f"bad vector id {vid!r}", path=path, line=lineno)
        if vid in vectors:
            raise ParseError(f"duplicate vector id {vid!r}", path=path, line=lineno)
        try:
            vec = np.array([float(v) for v in values.split(" ")], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"bad float: {exc}", path=path, line=lineno) from None
        if vec.shape[0] != dim:
            raise ParseError(
                f"vector has {vec.shape[0]} values, header says dim={dim}",
                path=path, line=lineno,
            )
        if not np.all(np.isfinite(vec)):
            raise ParseError("non-finite vector value", path=path, line=lineno)
        vectors[vid] = vec
    if len(vectors) != count:
        raise ParseError(
            f"header says count={count} but file has {len(vectors)} vectors", path=path
        )
    return vectors


def write_embedding_file(path, vectors, dim: Optional[int] = None) -> None:
    """Write id -> vector pairs in the embedding file format (insertion order).

    `dim` is only needed for an empty collection (header-only file).
    """
    items = list(vectors.items()) if isinstance(vectors, dict) else list(vectors)
    if not items:
        if dim is None or dim < 1:
            raise ValueError("writing an empty embedding file requires an explicit dim")
        Path(path).write_text(f"#dim={dim} count=0\n", encoding="utf-8")
        return
    dim = as_vector(items[0][1], "vector").shape[0]
    lines = [f"#dim={dim} count={len(items)}"]
    seen = set()
    for vid, vec in items:
        if not vid or any(ch.isspace() for ch in vid):
            raise ValueError(f"bad vector id {vid!r}")
        if vid in seen:
            raise ValueError(f"duplicate vector id {vid!r}")
        seen.add(vid)
        v = as_vector(vec, f"vector {vid}")
        if v.shape[0] != dim:
            raise ValueError(f"vector {vid} has dim {v.shape[0]}, expected {dim}")
        lines.append(vid + "\t" + " ".join(repr(float(x)) for x in v))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# trained-parameter serialization
# ---------------------------------------------------------------------------

_VARIANT_CODES = {"T": 0.0, "TV": 1.0}
_SUM_POS_CODES = {"end": 0.0, "start": 1.0}


def save_params(path, encoder: QueryEncoder, head: Optional[FusionHead]) -> None:
    """Serialize trained parameters in the embedding file format.

    Rows use reserved ids (`qproj.row<i>`, `qbias`, `layer1.row<i>`, ...) and
    are zero-padded to one shared dim; a leading `meta` row records the true
    shapes, the activation, and the variant so loading can trim exactly.
    """
    variant = "TV" if head is not None else "T"
    meta = [
        1.0,  # format version
        _VARIANT_CODES[variant],
        0.0,  # activation code: 0 = tanh
        float(encoder.text_dim),
        float(encoder.out_dim),
        float(head.in_dim) if head else 0.0,
        float(head.hidden_dim) if head else 0.0,
        float(head.out_dim) if head else 0.0,
        float(encoder.max_context_tokens),
        _SUM_POS_CODES[encoder.sum_token_position],
    ]
    rows: list[tuple[str, np.ndarray]] = [("meta", np.array(meta))]
    for i in range(encoder.w.shape[0]):
        rows.append((f"qproj.row{i}", encoder.w[i]))
    rows.append(("qbias", encoder.b))
    if head is not None:
        for i in range(head.w1.shape[0]):
            rows.append((f"layer1.row{i}", head.w1[i]))
        rows.append(("bias1", head.b1))
        for i in range(head.w2.shape[0]):
            rows.append((f"layer2.row{i}", head.w2[i]))
        rows.append(("bias2", head.b2))

    width = max(v.shape[0] for _, v in rows)
    padded = [
        (rid, np.concatenate([v, np.zeros(width - v.shape[0])])) for rid, v in rows
    ]
    write_embedding_file(path, padded)


def load_params(path) -> tuple[QueryEncoder, Optional[FusionHead]]:
    """Inverse of save_params."""
    vectors = read_embedding_file(path)
    if "meta" not in vectors:
        raise ParseError("params file lacks the meta row", path=path)
    meta = vectors["meta"]
    if int(meta[0]) != 1:
        raise ParseError(f"unsupported params version {meta[0]}", path=path)
    variant = "TV" if int(meta[1]) == 1 else "T"
    text_dim, enc_out = int(meta[3]), int(meta[4])
    head_in, head_hidden, head_out = int(meta[5]), int(meta[6]), int(meta[7])
    max_ctx, sum_pos = int(meta[8]), "start" if int(meta[9]) == 1 else "end"

    def grab(rid: str, width: int) -> np.ndarray:
        if rid not in vectors:
            raise ParseError(f"params file lacks row {rid!r}", path=path)
        return vectors[rid][:width]

    qw = np.stack([grab(f"qproj.row{i}", enc_out) for i in range(2 * text_dim)])
    encoder = QueryEncoder(
        w=qw,
        b=grab("qbias", enc_out),
        max_context_tokens=max_ctx,
        sum_token_position=sum_pos,
    )
    if variant == "T":
        return encoder, None
    head = FusionHead(
        w1=np.stack([grab(f"layer1.row{i}", head_hidden) for i in range(head_in)]),
        b1=grab("bias1", head_hidden),
        w2=np.stack([grab(f"layer2.row{i}", head_out) for i in range(head_hidden)]),
        b2=grab("bias2", head_out),
    )
    return encoder, head
