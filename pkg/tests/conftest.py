"""Shared fixtures: a tiny two-documentary corpus and its embedding files."""

import numpy as np
import pytest

from quotereel.cli import main
from quotereel.embedding import hash_text_embedder, write_embedding_file
from quotereel.retriever import read_clip_file

DIM = 8
SEED = 123


def write_corpus(root):
    corpus_dir = root / "corpus"
    corpus_dir.mkdir()
    (corpus_dir / "alpha.tsv").write_text(
        "#doc_id=alpha\n"
        "N\t0.00\t6.00\tOur story begins in a small harbor town\n"
        "A\t6.00\t10.00\tI never thought the storm would come back\n"
        "N\t10.00\t15.00\tBut the storm did return that winter\n"
        "B\t15.00\t19.00\twe lost the boats that night\n"
        "N\t19.00\t25.00\tRecovery took the town a full decade\n"
        "C\t25.00\t29.00\tthe harbor is alive again now\n"
        "N\t29.00\t34.00\tToday the port thrives once more\n",
        encoding="utf-8",
    )
    (corpus_dir / "beta.tsv").write_text(
        "#doc_id=beta\n"
        "NARR\t0.00\t5.00\tDeep caves hide ancient paintings\n"
        "X\t5.00\t9.00\tthe first chamber took my breath away\n"
        "NARR\t9.00\t14.00\tScientists dated the art to the ice age\n"
        "Y\t14.00\t18.00\twe sampled the pigments carefully\n"
        "NARR\t18.00\t23.00\tThe findings rewrote the local history\n",
        encoding="utf-8",
    )
    return corpus_dir


def write_config(path, corpus_dir, output_dir, with_embeddings=None, variant="T",
                 train_overrides=None, seed=SEED):
    lines = [
        "[paths]",
        f"corpus_dir = {corpus_dir}",
        f"output_dir = {output_dir}",
    ]
    if with_embeddings:
        lines += [
            f"clip_embeddings = {with_embeddings['text']}",
            f"frame_embeddings = {with_embeddings['frames']}",
            f"pool_frame_embeddings = {with_embeddings['pool_frames']}",
        ]
        if "ref_scripts" in with_embeddings:
            lines.append(f"reference_scripts = {with_embeddings['ref_scripts']}")
        if "ref_edls" in with_embeddings:
            lines.append(f"reference_edls = {with_embeddings['ref_edls']}")
    train = {
        "batch_size": "4",
        "max_epochs": "3",
        "patience": "3",
        "learning_rate": "0.001",
        "validation_fraction": "0",
    }
    train.update(train_overrides or {})
    lines += ["[retrieval]", f"variant = {variant}", "[train]"]
    lines += [f"{k} = {v}" for k, v in train.items()]
    lines += ["[run]", f"seed = {seed}"]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_embeddings_for(clips_path, out_dir, doc_durations):
    clips = read_clip_file(clips_path)
    embed = hash_text_embedder(DIM, seed=SEED)
    text = {c.clip_id: embed(c.transcript) for c in clips}
    rng = np.random.default_rng(7)
    frames = {}
    for c in clips:
        for j in range(3):
            frames[f"{c.clip_id}.f{j}"] = rng.standard_normal(DIM)
    pool_frames = {}
    for doc, dur in doc_durations.items():
        for s in range(int(dur)):
            pool_frames[f"{doc}.s{s}"] = rng.standard_normal(DIM)
    paths = {
        "text": out_dir / "clip_text.emb",
        "frames": out_dir / "clip_frames.emb",
        "pool_frames": out_dir / "doc_frames.emb",
    }
    write_embedding_file(paths["text"], text)
    write_embedding_file(paths["frames"], frames)
    write_embedding_file(paths["pool_frames"], pool_frames)
    return paths


@pytest.fixture()
def pipeline(tmp_path):
    corpus_dir = write_corpus(tmp_path)
    output_dir = tmp_path / "out"
    ingest_cfg = write_config(tmp_path / "ingest.ini", corpus_dir, output_dir)
    assert main(["--config", str(ingest_cfg), "ingest"]) == 0
    emb_paths = write_embeddings_for(
        output_dir / "clips.tsv", tmp_path, {"alpha": 34, "beta": 23}
    )
    cfg = write_config(tmp_path / "full.ini", corpus_dir, output_dir, emb_paths)
    return tmp_path, cfg, output_dir, emb_paths
