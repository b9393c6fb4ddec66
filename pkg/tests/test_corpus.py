"""Transcript ingestion, narrator detection, chunking, and sample construction."""

import numpy as np
import pytest

from quotereel.corpus import (
    DocumentaryRecord,
    SpeakerSegment,
    TrainingSample,
    build_training_samples,
    chunk_transcript,
    clip_id_for,
    extract_quotable_clips,
    identify_narrator,
    load_transcript,
    write_transcript,
)
from quotereel.errors import DataError, ParseError


def seg(speaker, start, end, text):
    return SpeakerSegment(speaker, float(start), float(end), text)


def make_doc(doc_id="d1", segments=None):
    if segments is None:
        segments = [
            seg("N", 0, 5, "The ocean hides many things from us"),
            seg("A", 5, 9, "we found the wreck at dawn"),
            seg("B", 9, 12, "nobody believed us"),
            seg("N", 12, 16, "But the proof was undeniable"),
        ]
    return DocumentaryRecord.from_segments(doc_id, segments)


class TestLoadTranscript:
    def test_well_formed_round_trip(self, tmp_path):
        path = tmp_path / "d1.tsv"
        path.write_text(
            "#doc_id=d1\n"
            "N\t0.00\t5.00\thello there everyone\n"
            "A\t5.00\t9.50\tan interview answer\n"
            "N\t9.50\t12.00\tcloser\n",
            encoding="utf-8",
        )
        doc = load_transcript(path)
        assert doc.doc_id == "d1"
        assert len(doc.segments) == 3
        assert [s.speaker_id for s in doc.segments] == ["N", "A", "N"]
        assert doc.duration_s == 12.0

        out = tmp_path / "copy.tsv"
        write_transcript(doc, out)
        assert load_transcript(out) == doc

    def test_start_after_end_names_line(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text(
            "#doc_id=d1\nN\t0.00\t5.00\tok\nA\t9.00\t5.00\tbackwards\n",
            encoding="utf-8",
        )
        with pytest.raises(ParseError) as exc:
            load_transcript(path)
        assert exc.value.line == 3

    def test_unsorted_segments_resorted(self, tmp_path):
        path = tmp_path / "d1.tsv"
        path.write_text(
            "#doc_id=d1\nB\t9.00\t12.00\tlater\nA\t0.00\t5.00\tearlier\n",
            encoding="utf-8",
        )
        doc = load_transcript(path)
        assert [s.start_s for s in doc.segments] == [0.0, 9.0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_transcript(tmp_path / "nope.tsv")

    def test_empty_transcript(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("#doc_id=d1\n", encoding="utf-8")
        with pytest.raises(ParseError, match="empty transcript"):
            load_transcript(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "noheader.tsv"
        path.write_text("N\t0.00\t5.00\thello\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            load_transcript(path)
        assert exc.value.line == 1

    @pytest.mark.parametrize(
        "line",
        [
            "N\t0\t5.00\tmissing decimals",
            "N\t0.0\t5.00\tone decimal only",
            "N\t0.00\t5.00",
            "N\t0.00\t5.00\t\textra field",
            "\t0.00\t5.00\tno speaker",
            "N\t0.00\t5.00\t   ",
        ],
    )
    def test_malformed_lines_rejected(self, tmp_path, line):
        path = tmp_path / "bad.tsv"
        path.write_text(f"#doc_id=d1\n{line}\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            load_transcript(path)
        assert exc.value.line == 2


class TestIdentifyNarrator:
    def test_strict_maximum(self):
        doc = make_doc(
            segments=[seg("A", 0, 10, " ".join(["word"] * 100)), seg("B", 10, 20, " ".join(["word"] * 20))]
        )
        assert identify_narrator(doc) == "A"

    def test_single_speaker(self):
        doc = make_doc(segments=[seg("Z", 0, 2, "only voice here")])
        assert identify_narrator(doc) == "Z"

    def test_tie_breaks_lexicographically(self):
        doc = make_doc(
            segments=[seg("B", 0, 5, " ".join(["x"] * 50)), seg("A", 5, 10, " ".join(["y"] * 50))]
        )
        assert identify_narrator(doc) == "A"

    def test_duration_measure(self):
        # A speaks more words, B speaks longer
        doc = make_doc(
            segments=[seg("A", 0, 2, "many words spoken very fast here"), seg("B", 2, 50, "slow")]
        )
        assert identify_narrator(doc, by="words") == "A"
        assert identify_narrator(doc, by="duration") == "B"

    def test_empty_documentary(self):
        doc = DocumentaryRecord(doc_id="d1", segments=(), duration_s=0.0)
        with pytest.raises(DataError):
            identify_narrator(doc)

    def test_narrator_present_with_max_count(self):
        rng = np.random.default_rng(0)
        for trial in range(25):
            segments = []
            t = 0.0
            for i in range(int(rng.integers(1, 12))):
                sp = f"S{rng.integers(0, 4)}"
                n_words = int(rng.integers(1, 9))
                segments.append(seg(sp, t, t + 1, " ".join(["w"] * n_words)))
                t += 1.0
            doc = make_doc(segments=segments)
            narrator = identify_narrator(doc)
            totals = {}
            for s in doc.segments:
                totals[s.speaker_id] = totals.get(s.speaker_id, 0) + s.word_count
            assert narrator in totals
            assert totals[narrator] == max(totals.values())


class TestExtractQuotableClips:
    def test_filters_narrator(self):
        doc = make_doc()
        clips = extract_quotable_clips(doc, "N")
        assert len(clips) == 2
        assert [c.transcript for c in clips] == [
            "we found the wreck at dawn",
            "nobody believed us",
        ]
        assert [c.clip_id for c in clips] == [clip_id_for("d1", 1), clip_id_for("d1", 2)]

    def test_all_narrator_yields_empty(self):
        doc = make_doc(segments=[seg("N", 0, 5, "one"), seg("N", 5, 9, "two")])
        assert extract_quotable_clips(doc, "N") == []

    def test_no_narrator_keeps_everything(self):
        doc = make_doc()
        assert len(extract_quotable_clips(doc, None)) == 4

    def test_partition_property(self):
        rng = np.random.default_rng(1)
        for trial in range(25):
            segments = [
                seg(f"S{rng.integers(0, 3)}", i, i + 1, f"word{i}")
                for i in range(int(rng.integers(1, 15)))
            ]
            doc = make_doc(segments=segments)
            narrator = identify_narrator(doc)
            clips = extract_quotable_clips(doc, narrator)
            narrator_count = sum(1 for s in doc.segments if s.speaker_id == narrator)
            assert len(clips) + narrator_count == len(doc.segments)


class TestChunkTranscript:
    def test_even_split(self):
        doc = make_doc(segments=[seg("S", i, i + 1, f"w{i}") for i in range(100)])
        chunks = chunk_transcript(doc, 10)
        assert len(chunks) == 10
        assert all(len(c.split()) == 10 for c in chunks)

    def test_twelve_over_ten(self):
        doc = make_doc(segments=[seg("S", i, i + 1, f"w{i}") for i in range(12)])
        sizes = [len(c.split()) for c in chunk_transcript(doc, 10)]
        assert sizes == [2, 2, 1, 1, 1, 1, 1, 1, 1, 1]

    def test_underfull(self):
        doc = make_doc(segments=[seg("S", i, i + 1, f"w{i}") for i in range(3)])
        chunks = chunk_transcript(doc, 10)
        assert [len(c.split()) for c in chunks] == [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]

    def test_zero_chunks_rejected(self):
        with pytest.raises(ValueError):
            chunk_transcript(make_doc(), 0)

    def test_partition_properties(self):
        rng = np.random.default_rng(2)
        for trial in range(30):
            count = int(rng.integers(0, 40))
            n = int(rng.integers(1, 15))
            segments = [seg("S", i, i + 1, f"w{i}") for i in range(count)]
            doc = DocumentaryRecord.from_segments("d", segments)
            chunks = chunk_transcript(doc, n)
            sizes = [len(c.split()) for c in chunks]
            assert len(chunks) == n
            assert sum(sizes) == count
            assert max(sizes) - min(sizes) <= 1
            assert sizes == sorted(sizes, reverse=True)
            joined = " ".join(c for c in chunks if c)
            assert joined == " ".join(s.text for s in doc.segments)


class TestBuildTrainingSamples:
    def test_canonical(self):
        doc = make_doc(
            segments=[seg("N", 0, 2, "before"), seg("Q", 2, 4, "quote"), seg("N", 4, 6, "after")]
        )
        samples = build_training_samples(doc, "N")
        assert samples == [
            TrainingSample("before", "after", clip_id_for("d1", 1), "d1")
        ]

    def test_boundary_prev_empty(self):
        doc = make_doc(segments=[seg("Q", 0, 2, "quote"), seg("N", 2, 4, "after")])
        samples = build_training_samples(doc, "N")
        assert samples[0].prev_narration == ""
        assert samples[0].next_narration == "after"

    def test_consecutive_quotes_share_pair(self):
        doc = make_doc(
            segments=[
                seg("N", 0, 2, "before"),
                seg("Q", 2, 4, "one"),
                seg("Q", 4, 6, "two"),
                seg("N", 6, 8, "after"),
            ]
        )
        samples = build_training_samples(doc, "N")
        assert len(samples) == 2
        assert all(s.prev_narration == "before" and s.next_narration == "after" for s in samples)

    def test_isolated_quote_dropped(self):
        doc = make_doc(segments=[seg("Q", 0, 2, "alone")])
        assert build_training_samples(doc, "N") == []

    def test_no_narration_between_positive_and_flank(self):
        rng = np.random.default_rng(3)
        for trial in range(25):
            segments = [
                seg("N" if rng.random() < 0.4 else f"Q{rng.integers(0, 3)}", i, i + 1, f"t{i}")
                for i in range(int(rng.integers(2, 20)))
            ]
            doc = make_doc(segments=segments)
            samples = build_training_samples(doc, "N")
            texts = [s.text for s in doc.segments]
            speakers = [s.speaker_id for s in doc.segments]
            for sample in samples:
                pos = int(sample.positive_clip_id.rsplit("q", 1)[1])
                if sample.prev_narration:
                    j = max(
                        i for i in range(pos) if speakers[i] == "N" and texts[i] == sample.prev_narration
                    )
                    assert all(speakers[i] != "N" for i in range(j + 1, pos))
                if sample.next_narration:
                    j = min(
                        i
                        for i in range(pos + 1, len(texts))
                        if speakers[i] == "N" and texts[i] == sample.next_narration
                    )
                    assert all(speakers[i] != "N" for i in range(pos + 1, j))
