"""Command-line pipeline: ingest, train, retrieve, assemble, evaluate.

Configuration is a flat `key = value` file with section headers. All
randomness flows from the single run seed through named sub-seeds, logs go
to stderr, and every command validates its inputs before writing anything.
Exit codes: 0 success, 2 config error, 3 data error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import assembler, corpus, embedding, metrics, retriever, script as script_mod
from .errors import ConfigError, DataError, ParseError, QuoteReelError

log = logging.getLogger("quotereel")

TRANSCRIPT_SUFFIX = ".tsv"


@dataclass
class PipelineConfig:
    corpus_dir: Path
    output_dir: Path
    clip_embeddings: Optional[Path] = None
    frame_embeddings: Optional[Path] = None
    pool_frame_embeddings: Optional[Path] = None
    params_file: Optional[Path] = None
    reference_scripts: Optional[Path] = None
    reference_edls: Optional[Path] = None
    variant: str = "T"
    seed: int = 0
    narrator_by: str = "words"
    text_embed_dim: Optional[int] = None
    alphas: tuple[float, ...] = (1.0,)
    train: embedding.TrainConfig = field(default_factory=embedding.TrainConfig)
    scr_threshold: float = 0.9
    narration_rate_wpm: float = 150.0

    @classmethod
    def from_file(cls, path, seed_override=None, variant_override=None) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"bad config file {path}: {exc}") from None

        def get(section, key, fallback=None):
            return parser.get(section, key, fallback=fallback)

        if not parser.has_section("paths"):
            raise ConfigError("config needs a [paths] section")
        for required in ("corpus_dir", "output_dir"):
            if get("paths", required) is None:
                raise ConfigError(f"[paths] {required} is required")

        def path_of(key, must_exist=False):
            raw = get("paths", key)
            if raw is None or not raw.strip():
                return None
            p = Path(raw).expanduser()
            if must_exist and not p.exists():
                raise ConfigError(f"[paths] {key} does not exist: {p}")
            return p

        corpus_dir = path_of("corpus_dir", must_exist=True)
        output_dir = path_of("output_dir")

        seed_raw = seed_override if seed_override is not None else get("run", "seed", "0")
        try:
            seed = int(seed_raw)
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {seed_raw!r}") from None
        if seed < 0:
            raise ConfigError("seed must be non-negative")

        variant = variant_override or get("retrieval", "variant", "T")
        if variant not in retriever.VARIANTS:
            raise ConfigError(f"variant must be one of {retriever.VARIANTS}, got {variant!r}")

        narrator_by = get("run", "narrator_by", "words")
        if narrator_by not in ("words", "duration"):
            raise ConfigError(f"narrator_by must be words or duration, got {narrator_by!r}")

        dim_raw = get("run", "text_embed_dim")
        text_embed_dim = None
        if dim_raw:
            try:
                text_embed_dim = int(dim_raw)
            except ValueError:
                raise ConfigError(f"text_embed_dim must be an integer, got {dim_raw!r}") from None
            if text_embed_dim < 1:
                raise ConfigError("text_embed_dim must be >= 1")

        alpha_raw = get("train", "alpha", "1")
        try:
            alphas = tuple(float(a.strip()) for a in alpha_raw.split(","))
        except ValueError:
            raise ConfigError(f"bad alpha list {alpha_raw!r}") from None

        def num(section, key, cast, default):
            raw = get(section, key)
            if raw is None:
                return default
            try:
                return cast(raw)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None

        def flag(section, key, default):
            raw = get(section, key)
            if raw is None:
                return default
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")

        hidden_raw = get("train", "hidden_dim")
        try:
            train_cfg = embedding.TrainConfig(
                alpha=alphas[0],
                learning_rate=num("train", "learning_rate", float, 1e-5),
                batch_size=num("train", "batch_size", int, 64),
                max_epochs=num("train", "max_epochs", int, 100),
                patience=num("train", "patience", int, 30),
                seed=seed,
                same_doc_negative_fraction=num(
                    "train", "same_doc_negative_fraction", float, 0.3
                ),
                loss_kind=get("train", "loss_kind", "contrastive"),
                include_positive_in_denominator=flag(
                    "train", "include_positive_in_denominator", False
                ),
                sum_token_position=get("train", "sum_token_position", "end"),
                max_context_tokens=num("train", "max_context_tokens", int, 128),
                hidden_dim=int(hidden_raw) if hidden_raw else None,
                validation_fraction=num("train", "validation_fraction", float, 0.1),
                l_gen=num("train", "l_gen", float, 0.0),
            )
        except ValueError as exc:
            raise ConfigError(f"bad [train] settings: {exc}") from None

        return cls(
            corpus_dir=corpus_dir,
            output_dir=output_dir,
            clip_embeddings=path_of("clip_embeddings", must_exist=True),
            frame_embeddings=path_of("frame_embeddings", must_exist=True),
            pool_frame_embeddings=path_of("pool_frame_embeddings", must_exist=True),
            params_file=path_of("params"),
            reference_scripts=path_of("reference_scripts", must_exist=True),
            reference_edls=path_of("reference_edls", must_exist=True),
            variant=variant,
            seed=seed,
            narrator_by=narrator_by,
            text_embed_dim=text_embed_dim,
            alphas=alphas,
            train=train_cfg,
            scr_threshold=num("metrics", "scr_threshold", float, 0.9),
            narration_rate_wpm=num("metrics", "narration_rate_wpm", float, 150.0),
        )

    @property
    def clips_path(self) -> Path:
        return self.output_dir / "clips.tsv"

    @property
    def samples_path(self) -> Path:
        return self.output_dir / "samples.tsv"

    @property
    def narrators_path(self) -> Path:
        return self.output_dir / "narrators.tsv"

    def params_path(self, alpha: Optional[float] = None) -> Path:
        if self.params_file is not None:
            return self.params_file
        if alpha is None or len(self.alphas) == 1:
            return self.output_dir / "params.emb"
        return self.output_dir / f"params_alpha{alpha}.emb"

    def history_path(self, alpha: Optional[float] = None) -> Path:
        if alpha is None or len(self.alphas) == 1:
            return self.output_dir / "loss_history.csv"
        return self.output_dir / f"loss_history_alpha{alpha}.csv"


# ---------------------------------------------------------------------------
# shared loading helpers
# ---------------------------------------------------------------------------

def _load_documents(cfg: PipelineConfig) -> list[corpus.DocumentaryRecord]:
    paths = sorted(cfg.corpus_dir.glob(f"*{TRANSCRIPT_SUFFIX}"))
    if not paths:
        raise DataError(f"no *{TRANSCRIPT_SUFFIX} transcripts in {cfg.corpus_dir}")
    docs = [corpus.load_transcript(p) for p in paths]
    ids = [d.doc_id for d in docs]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate doc_id across transcripts")
    return sorted(docs, key=lambda d: d.doc_id)


def _write_samples(path, samples) -> None:
    lines = []
    for s in samples:
        lines.append(
            "\t".join((s.doc_id, s.positive_clip_id, s.prev_narration, s.next_narration))
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _read_samples(path) -> list[corpus.TrainingSample]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"samples file not found: {path} (run ingest first)")
    samples = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        fields_ = raw.split("\t")
        if len(fields_) != 4:
            raise ParseError("expected 4 tab-separated fields", path=path, line=lineno)
        doc_id, positive, prev, nxt = fields_
        samples.append(
            corpus.TrainingSample(
                prev_narration=prev, next_narration=nxt,
                positive_clip_id=positive, doc_id=doc_id,
            )
        )
    return samples


def _load_clips(cfg: PipelineConfig, with_frames: bool) -> list[corpus.ClipRecord]:
    if not cfg.clips_path.is_file():
        raise DataError(f"clip file not found: {cfg.clips_path} (run ingest first)")
    if cfg.clip_embeddings is None:
        raise ConfigError("[paths] clip_embeddings is required for this command")
    clips = retriever.read_clip_file(cfg.clips_path)
    text_vectors = embedding.read_embedding_file(cfg.clip_embeddings)
    frame_vectors = None
    if with_frames:
        if cfg.frame_embeddings is None:
            raise ConfigError("[paths] frame_embeddings is required for the TV variant")
        frame_vectors = embedding.read_embedding_file(cfg.frame_embeddings)
    return retriever.attach_embeddings(clips, text_vectors, frame_vectors)


def _text_embedder(cfg: PipelineConfig, clips) -> embedding.TextEmbedder:
    if cfg.text_embed_dim is not None:
        dim = cfg.text_embed_dim
    else:
        first = clips[0].text_embedding
        if first is None:
            raise DataError("cannot infer text embedding dim from clips")
        dim = first.shape[0]
    return embedding.hash_text_embedder(dim, seed=cfg.seed)


def _frame_pool(cfg: PipelineConfig, doc_id: str) -> assembler.FramePool:
    if cfg.pool_frame_embeddings is None:
        raise ConfigError("[paths] pool_frame_embeddings is required for assembly")
    vectors = embedding.read_embedding_file(cfg.pool_frame_embeddings)
    rows: dict[int, np.ndarray] = {}
    prefix = f"{doc_id}.s"
    for vid, vec in vectors.items():
        if vid.startswith(prefix) and vid[len(prefix):].isdigit():
            rows[int(vid[len(prefix):])] = vec
    if not rows:
        raise DataError(f"no frames for {doc_id} in {cfg.pool_frame_embeddings}")
    count = max(rows) + 1
    if sorted(rows) != list(range(count)):
        raise DataError(f"frame seconds for {doc_id} are not contiguous from 0")
    return assembler.FramePool(
        doc_id=doc_id, embeddings=np.stack([rows[i] for i in range(count)])
    )


def _frame_lookup(cfg: PipelineConfig) -> Optional[dict[tuple[str, int], np.ndarray]]:
    if cfg.pool_frame_embeddings is None:
        return None
    vectors = embedding.read_embedding_file(cfg.pool_frame_embeddings)
    lookup: dict[tuple[str, int], np.ndarray] = {}
    for vid, vec in vectors.items():
        doc, dot, sec = vid.rpartition(".s")
        if dot and sec.isdigit():
            lookup[(doc, int(sec))] = vec
    return lookup


def _detect_encoding(text: str) -> str:
    probe = script_mod._scan_markers(text, (script_mod.QUOTE,))
    return script_mod.IDQ if probe else script_mod.DQ


def _load_script(path, encoding: Optional[str] = None) -> script_mod.Script:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"script file not found: {path}")
    text = path.read_text(encoding="utf-8")
    enc = encoding or _detect_encoding(text)
    doc_id = path.name.split(".")[0]
    try:
        if enc == script_mod.IDQ:
            return script_mod.parse_idq(text, doc_id=doc_id)
        return script_mod.parse_dq(text, doc_id=doc_id)
    except ParseError as exc:
        raise ParseError(str(exc), path=path) from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ingest(cfg: PipelineConfig) -> None:
    """Transcripts -> clip metadata, training samples, narrator assignments."""
    docs = _load_documents(cfg)
    all_clips: list[corpus.ClipRecord] = []
    all_samples: list[corpus.TrainingSample] = []
    narrators: list[tuple[str, str]] = []
    for doc in docs:
        narrator = corpus.identify_narrator(doc, by=cfg.narrator_by)
        narrators.append((doc.doc_id, narrator))
        all_clips.extend(corpus.extract_quotable_clips(doc, narrator))
        all_samples.extend(corpus.build_training_samples(doc, narrator))

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    retriever.write_clip_file(cfg.clips_path, all_clips)
    _write_samples(cfg.samples_path, all_samples)
    cfg.narrators_path.write_text(
        "".join(f"{d}\t{n}\n" for d, n in narrators), encoding="utf-8"
    )
    log.info(
        "ingested %d documentaries: %d clips, %d samples",
        len(docs), len(all_clips), len(all_samples),
    )


def _init_models(cfg: PipelineConfig, clips, train_cfg: embedding.TrainConfig):
    text_dim = clips[0].text_embedding.shape[0]
    embed_dim = cfg.text_embed_dim or text_dim
    rng = np.random.default_rng(embedding.substream_seed(cfg.seed, "init"))
    head = None
    if cfg.variant == "TV":
        frame_dim = clips[0].frame_embeddings[0].shape[0]
        in_dim = text_dim + 3 * frame_dim
        head = embedding.FusionHead.create(
            in_dim, out_dim=text_dim, hidden_dim=train_cfg.hidden_dim, rng=rng
        )
    encoder = embedding.QueryEncoder.create(
        text_dim=embed_dim,
        out_dim=text_dim,
        rng=rng,
        max_context_tokens=train_cfg.max_context_tokens,
        sum_token_position=train_cfg.sum_token_position,
    )
    return head, encoder


def cmd_train(cfg: PipelineConfig) -> None:
    """Train retrieval parameters; emits params plus a per-epoch loss CSV."""
    clips = _load_clips(cfg, with_frames=cfg.variant == "TV")
    samples = _read_samples(cfg.samples_path)
    if not samples:
        raise DataError("no training samples; corpus may have no quotable clips")
    # training reads raw clip features and documentary membership from the
    # pool; its e_m matrix is irrelevant here, so the text-only build suffices
    pool = retriever.build_pool(clips, head=None, variant="T")
    text_embedder = _text_embedder(cfg, clips)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)

    for alpha in cfg.alphas:
        train_cfg = embedding.TrainConfig(
            **{
                **cfg.train.__dict__,
                "alpha": alpha,
            }
        )
        head, encoder = _init_models(cfg, clips, train_cfg)
        result = embedding.train(head, encoder, samples, pool, train_cfg, text_embedder)
        params_path = cfg.params_path(alpha)
        embedding.save_params(params_path, result.encoder, result.head)
        history_path = cfg.history_path(alpha)
        with open(history_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss", "best_val"])
            for row in result.history:
                writer.writerow(
                    [row.epoch, repr(row.train_loss), repr(row.val_loss), repr(row.best_val)]
                )
        log.info(
            "alpha=%s: trained %d epochs, best val loss %s -> %s",
            alpha, len(result.history), result.best_val, params_path,
        )


def _load_pool(cfg: PipelineConfig):
    clips = _load_clips(cfg, with_frames=cfg.variant == "TV")
    params = cfg.params_path()
    if not params.is_file():
        raise DataError(f"params file not found: {params} (run train first)")
    encoder, head = embedding.load_params(params)
    if cfg.variant == "TV" and head is None:
        raise DataError("params file has no fusion head but variant is TV")
    pool = retriever.build_pool(
        clips, head=head if cfg.variant == "TV" else None, variant=cfg.variant
    )
    return pool, encoder, head, clips


def cmd_retrieve(cfg: PipelineConfig, script_path, encoding: Optional[str] = None) -> None:
    """Fulfill a script's quotes; emits the fulfilled script and ranking audit."""
    pool, encoder, head, clips = _load_pool(cfg)
    scr = _load_script(script_path, encoding)
    text_embedder = _text_embedder(cfg, clips)
    try:
        fulfilled, audits = retriever.fulfill_quotes_audited(
            scr, pool, encoder, head if cfg.variant == "TV" else None, text_embedder
        )
    except DataError as exc:
        raise DataError(f"{script_path}: {exc}") from None

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(script_path).name.split(".")[0]
    out_script = cfg.output_dir / f"{stem}.fulfilled.txt"
    out_script.write_text(script_mod.serialize(fulfilled) + "\n", encoding="utf-8")
    out_rank = cfg.output_dir / f"{stem}.rankings.csv"
    with open(out_rank, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["element_index", "rank", "clip_id", "fitness"])
        for audit in audits:
            for rank, (cid, score) in enumerate(audit.ranking.ranked, start=1):
                writer.writerow([audit.element_index, rank, cid, repr(score)])
    log.info("fulfilled %d quotes -> %s", len(audits), out_script)


def _read_rankings(path) -> dict[int, list[str]]:
    rankings: dict[int, list[tuple[int, str]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["element_index", "rank", "clip_id", "fitness"]:
            raise ParseError("bad rankings header", path=path, line=1)
        for row in reader:
            idx, rank, cid = int(row[0]), int(row[1]), row[2]
            rankings.setdefault(idx, []).append((rank, cid))
    return {
        idx: [cid for _, cid in sorted(pairs)] for idx, pairs in rankings.items()
    }


def cmd_assemble(cfg: PipelineConfig, fulfilled_path) -> None:
    """Fulfilled script -> EDL file."""
    clips = _load_clips(cfg, with_frames=False)
    pool = retriever.build_pool(clips, head=None, variant="T")
    scr = _load_script(fulfilled_path, script_mod.DQ)
    text_embedder = _text_embedder(cfg, clips)

    # cmd_retrieve leaves a rankings audit next to the fulfilled script; it
    # carries each quote's resolved clip and the next-best candidates for dedup
    rankings_path = Path(fulfilled_path).parent / f"{scr.doc_id}.rankings.csv"
    quote_rankings = _read_rankings(rankings_path) if rankings_path.is_file() else None
    if quote_rankings:
        elements = list(scr.elements)
        for idx, ranked in quote_rankings.items():
            if idx < len(elements) and isinstance(elements[idx], script_mod.DirectQuote):
                elements[idx] = script_mod.DirectQuote(
                    text=elements[idx].text, resolved_clip_id=ranked[0]
                )
        scr = script_mod.Script(
            doc_id=scr.doc_id, elements=tuple(elements), encoding=scr.encoding
        )
    else:
        # no audit file: resolve quotes by nearest transcript embedding
        scr = retriever.fulfill_quotes(scr, pool, None, None, text_embedder)

    frame_pool = _frame_pool(cfg, scr.doc_id)
    timeline = assembler.assemble(
        scr,
        pool,
        frame_pool,
        text_embedder=text_embedder,
        narration_rate_wpm=cfg.narration_rate_wpm,
        quote_rankings=quote_rankings,
    )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.output_dir / f"{scr.doc_id}.edl.csv"
    assembler.export_timeline(timeline, out)
    log.info("assembled %d entries (%.1fs) -> %s", len(timeline.entries),
             timeline.total_duration_s, out)


def cmd_evaluate(cfg: PipelineConfig, edl_dir=None, scripts_dir=None) -> None:
    """Metric report CSV plus plot-data series for recall and loss curves."""
    edl_dir = Path(edl_dir) if edl_dir else cfg.output_dir
    scripts_dir = Path(scripts_dir) if scripts_dir else cfg.output_dir

    fulfilled = sorted(scripts_dir.glob("*.fulfilled.txt"))
    edls = {p.name.split(".")[0]: p for p in sorted(edl_dir.glob("*.edl.csv"))}
    if not fulfilled and not edls:
        raise DataError(f"nothing to evaluate in {edl_dir} / {scripts_dir}")

    clips = None
    interview_base: dict[str, list[str]] = {}
    if cfg.clips_path.is_file():
        clips = retriever.read_clip_file(cfg.clips_path)
        for c in clips:
            interview_base.setdefault(c.doc_id, []).append(c.transcript)

    frame_lookup = _frame_lookup(cfg)
    if cfg.text_embed_dim is not None:
        dim = cfg.text_embed_dim
    elif frame_lookup:
        dim = next(iter(frame_lookup.values())).shape[0]
    elif cfg.clip_embeddings is not None:
        vectors = embedding.read_embedding_file(cfg.clip_embeddings)
        dim = next(iter(vectors.values())).shape[0] if vectors else 32
    else:
        dim = 32
    text_embedder = embedding.hash_text_embedder(dim, seed=cfg.seed)
    matcher = metrics.nearest_interview_matcher(text_embedder)

    reports: dict[str, metrics.MetricReport] = {}

    def spoken_text(s: script_mod.Script) -> str:
        parts = []
        for el in s.elements:
            if isinstance(el, (script_mod.Narration, script_mod.DirectQuote)):
                parts.append(el.text)
        return " ".join(parts)

    for path in fulfilled:
        doc_id = path.name.split(".")[0]
        scr = _load_script(path, script_mod.DQ)
        report = reports.setdefault(doc_id, metrics.MetricReport())
        report.qdi = float(script_mod.count_quotes(scr))
        report.qcr_pct = 100.0 if script_mod.count_quotes(scr) >= 1 else 0.0
        spans = [
            el.text for el in scr.elements if isinstance(el, script_mod.DirectQuote)
        ]
        base = interview_base.get(doc_id)
        if base:
            report.overlap_ratio = metrics.overlap_ratio(spans, base, matcher)
        if cfg.reference_scripts is not None:
            ref_path = cfg.reference_scripts / f"{doc_id}.txt"
            if ref_path.is_file():
                ref_text = ref_path.read_text(encoding="utf-8")
                try:
                    ref_spoken = spoken_text(script_mod.parse_dq(ref_text, doc_id))
                except ParseError:
                    ref_spoken = ref_text
                gen_spoken = spoken_text(scr)
                report.rouge1_f1 = metrics.rouge(gen_spoken, ref_spoken, 1)
                report.rouge2_f1 = metrics.rouge(gen_spoken, ref_spoken, 2)
                report.rougeL_f1 = metrics.rouge(gen_spoken, ref_spoken, "L")

    for doc_id, path in edls.items():
        timeline = assembler.load_timeline(path)
        if not timeline.entries:
            continue
        report = reports.setdefault(doc_id, metrics.MetricReport())
        report.duration_s = timeline.total_duration_s
        report.rep_pct = metrics.repetitiveness(timeline)
        report.interview_ratio_pct = metrics.interview_ratio(timeline)
        if frame_lookup is not None:
            keys = timeline.frames()
            if all(k in frame_lookup for k in keys):
                if len(keys) >= 2:
                    report.scr_pct = metrics.scene_change_rate(
                        timeline, frame_lookup, cfg.scr_threshold
                    )
                if all(e.text for e in timeline.entries):
                    ci, cn = metrics.clip_alignment_scores(
                        timeline, text_embedder, frame_lookup
                    )
                    report.clips_i, report.clips_n = ci, cn
        if cfg.reference_edls is not None:
            ref_path = cfg.reference_edls / f"{doc_id}.edl.csv"
            if ref_path.is_file():
                truth = assembler.load_timeline(ref_path)
                if truth.entries:
                    report.frame_f1_pct = metrics.frame_f1(timeline, truth)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    report_path = cfg.output_dir / "report.csv"
    metrics.write_report_csv(report_path, reports)
    log.info("wrote %s (%d documents)", report_path, len(reports))

    _emit_plot_data(cfg)


def _emit_plot_data(cfg: PipelineConfig) -> None:
    """Two-column series files: recall@k curve and train/val loss curves."""
    history = cfg.history_path()
    if history.is_file():
        with open(history, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        (cfg.output_dir / "loss_curve_train.tsv").write_text(
            "".join(f"{r[0]}\t{r[1]}\n" for r in rows), encoding="utf-8"
        )
        (cfg.output_dir / "loss_curve_val.tsv").write_text(
            "".join(f"{r[0]}\t{r[2]}\n" for r in rows), encoding="utf-8"
        )

    params = cfg.params_path()
    if not (
        params.is_file()
        and cfg.samples_path.is_file()
        and cfg.clips_path.is_file()
        and cfg.clip_embeddings is not None
    ):
        return
    clips = _load_clips(cfg, with_frames=cfg.variant == "TV")
    samples = _read_samples(cfg.samples_path)
    if not samples:
        return
    encoder, head = embedding.load_params(params)
    pool = retriever.build_pool(
        clips, head=head if cfg.variant == "TV" else None, variant=cfg.variant
    )
    text_embedder = _text_embedder(cfg, clips)
    results = []
    truth = {}
    max_k = min(10, len(pool))
    for i, s in enumerate(samples):
        h = embedding.encode_query(encoder, s.prev_narration, s.next_narration, text_embedder)
        qid = f"sample{i}"
        results.append(retriever.retrieve_top_k(h, pool, max_k, query_id=qid))
        truth[qid] = s.positive_clip_id
    lines = []
    for k in range(1, max_k + 1):
        lines.append(f"{k}\t{repr(retriever.recall_at_k(results, truth, k))}\n")
    (cfg.output_dir / "recall_curve.tsv").write_text("".join(lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quotereel",
        description="Quote-aware teaser pipeline: ingest, train, retrieve, assemble, evaluate.",
    )
    parser.add_argument("--config", required=True, help="pipeline config file")
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")
    parser.add_argument(
        "--variant", choices=list(retriever.VARIANTS), default=None,
        help="override the retrieval variant",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", help="parse transcripts into clips and samples")
    sub.add_parser("train", help="train retrieval parameters")
    p = sub.add_parser("retrieve", help="fulfill a script's quote placeholders")
    p.add_argument("script", help="script file to fulfill")
    p.add_argument("--encoding", choices=[script_mod.DQ, script_mod.IDQ], default=None)
    p = sub.add_parser("assemble", help="assemble a fulfilled script into an EDL")
    p.add_argument("script", help="fulfilled script file")
    p = sub.add_parser("evaluate", help="compute the metric report and plot data")
    p.add_argument("--edl-dir", default=None)
    p.add_argument("--scripts-dir", default=None)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    args = _build_parser().parse_args(argv)
    try:
        cfg = PipelineConfig.from_file(
            args.config, seed_override=args.seed, variant_override=args.variant
        )
        if args.command == "ingest":
            cmd_ingest(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "retrieve":
            cmd_retrieve(cfg, args.script, args.encoding)
        elif args.command == "assemble":
            cmd_assemble(cfg, args.script)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.edl_dir, args.scripts_dir)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (QuoteReelError, ValueError, OSError) as exc:
        log.error("data error: %s", exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
