"""Batch embedding export in the teaser pipeline's vector file format.

Two modes share one output format. Mock mode derives every vector from a
seeded hash (unit-normalized), so files are reproducible offline with no
model downloads; real mode runs an off-the-shelf encoder named by a model
identifier string. The file format is the pipeline's external interface:
`#dim=<d> count=<n>` then `id<TAB>v1 v2 ... vd` per line, UTF-8.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ExportError(ValueError):
    """Manifest or model problem that prevents an export."""


@dataclass
class ExportJob:
    """One export run: a manifest of ids plus payloads, and where to write.

    Payloads are texts (text export), or frame sources (frame export: an
    integer frame count in mock mode, a directory of frame images in real
    mode). `model` is only consulted in real mode.
    """

    manifest: Path
    output: Path
    mode: str = "mock"
    model: str = "sentence-transformers/all-mpnet-base-v2"
    batch_size: int = 32
    seed: int = 0
    dim: int = 64

    def __post_init__(self):
        if self.mode not in ("mock", "real"):
            raise ExportError(f"unknown mode {self.mode!r}")
        if self.dim < 1:
            raise ExportError("dim must be >= 1")
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")


def read_manifest(path) -> list[tuple[str, str]]:
    """Parse `id<TAB>payload` lines, rejecting duplicate ids by name."""
    path = Path(path)
    if not path.is_file():
        raise ExportError(f"manifest not found: {path}")
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise ExportError(f"{path}:{lineno}: expected id<TAB>payload")
        entry_id, payload = parts
        if not entry_id or any(ch.isspace() for ch in entry_id):
            raise ExportError(f"{path}:{lineno}: bad id {entry_id!r}")
        if entry_id in seen:
            raise ExportError(f"duplicate manifest id {entry_id!r}")
        seen.add(entry_id)
        entries.append((entry_id, payload))
    return entries


def write_embedding_file(path, rows: list[tuple[str, np.ndarray]], dim: int) -> None:
    lines = [f"#dim={dim} count={len(rows)}"]
    for rid, vec in rows:
        lines.append(rid + "\t" + " ".join(repr(float(x)) for x in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _hash_seed(seed: int, key: str) -> int:
    digest = hashlib.sha256(f"{seed}:{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def mock_vector(key: str, dim: int, seed: int) -> np.ndarray:
    """Seeded hash of the key projected to dim, unit-normalized.

    Uses the same `<seed>:text:<key>` hash stream as the pipeline's built-in
    hash embedder, so mock text vectors and query-side embeddings agree when
    dim and seed agree.
    """
    rng = np.random.default_rng(_hash_seed(seed, f"text:{key}"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _load_text_model(job: ExportJob):
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ExportError(
            "real mode needs sentence-transformers (pip install embed-export[real])"
        ) from exc
    try:
        return SentenceTransformer(job.model)
    except Exception as exc:
        raise ExportError(f"cannot load model {job.model!r}: {exc}") from exc


def export_text_embeddings(job: ExportJob) -> None:
    """One vector per manifest entry, in manifest order."""
    entries = read_manifest(job.manifest)
    if job.mode == "mock":
        rows = [(eid, mock_vector(payload, job.dim, job.seed)) for eid, payload in entries]
        dim = job.dim
    else:
        model = _load_text_model(job)
        rows = []
        for lo in range(0, len(entries), job.batch_size):
            chunk = entries[lo: lo + job.batch_size]
            vectors = model.encode([payload for _, payload in chunk])
            rows.extend((eid, np.asarray(v, dtype=np.float64))
                        for (eid, _), v in zip(chunk, vectors))
        dim = rows[0][1].shape[0] if rows else 0
        if rows and any(v.shape[0] != dim for _, v in rows):
            raise ExportError("model returned inconsistent embedding dims")
        if not rows:
            raise ExportError("real mode cannot infer dim from an empty manifest")
    write_embedding_file(job.output, rows, dim)


def select_frames(clip_id: str, frame_count: int, seed: int) -> list[int]:
    """Three distinct seeded frame indices for a clip, ascending."""
    if frame_count < 3:
        raise ExportError(f"clip {clip_id!r} has {frame_count} frames; need at least 3")
    rng = np.random.default_rng(_hash_seed(seed, f"frames:{clip_id}"))
    return sorted(int(i) for i in rng.choice(frame_count, size=3, replace=False))


def _frame_source(job: ExportJob, clip_id: str, payload: str):
    """Resolve a payload to (frame_count, frame_paths or None)."""
    if job.mode == "mock":
        try:
            count = int(payload)
        except ValueError:
            raise ExportError(
                f"clip {clip_id!r}: mock mode expects an integer frame count, got {payload!r}"
            ) from None
        return count, None
    frame_dir = Path(payload)
    if not frame_dir.is_dir():
        raise ExportError(f"clip {clip_id!r}: frame directory not found: {frame_dir}")
    paths = sorted(
        p for p in frame_dir.iterdir() if p.suffix.lower() in (".jpg", ".jpeg", ".png")
    )
    return len(paths), paths


def export_frame_embeddings(job: ExportJob) -> None:
    """Three vectors per clip with ids `<clip>.f0/.f1/.f2`, selection seeded."""
    entries = read_manifest(job.manifest)
    model = None
    rows: list[tuple[str, np.ndarray]] = []
    dim = job.dim
    for clip_id, payload in entries:
        count, paths = _frame_source(job, clip_id, payload)
        indices = select_frames(clip_id, count, job.seed)
        if job.mode == "mock":
            for j, idx in enumerate(indices):
                rows.append((f"{clip_id}.f{j}", mock_vector(f"{clip_id}#frame{idx}", job.dim, job.seed)))
        else:
            try:
                from PIL import Image
            except ImportError as exc:
                raise ExportError("real frame mode needs Pillow") from exc
            if model is None:
                model = _load_text_model(job)  # CLIP-style encoders accept images
            images = [Image.open(paths[idx]) for idx in indices]
            vectors = model.encode(images)
            for j, v in enumerate(vectors):
                vec = np.asarray(v, dtype=np.float64)
                rows.append((f"{clip_id}.f{j}", vec))
            dim = rows[-1][1].shape[0]
    if job.mode == "real" and rows and any(v.shape[0] != dim for _, v in rows):
        raise ExportError("model returned inconsistent embedding dims")
    write_embedding_file(job.output, rows, dim)
