"""Metric fixtures and oracle equivalence for ROUGE, OR, and teaser measures."""

import csv

import numpy as np
import pytest

from quotereel.assembler import TeaserTimeline, TimelineEntry
from quotereel.embedding import hash_text_embedder
from quotereel.errors import DataError
from quotereel.metrics import (
    MetricReport,
    REPORT_FIELDS,
    alignment_score,
    clip_alignment_scores,
    frame_f1,
    interview_ratio,
    nearest_interview_matcher,
    overlap_ratio,
    qcr,
    qdi,
    repetitiveness,
    rouge,
    scene_change_rate,
    tokenize,
    top20_embedding_matcher,
    write_report_csv,
)
from quotereel.script import DQ, IDQ, DirectQuote, Narration, QuotePlaceholder, Script


def script_with_quotes(n, doc="d"):
    elements = [Narration("start")]
    for i in range(n):
        elements.append(QuotePlaceholder())
        elements.append(Narration(f"bridge {i}"))
    return Script.build(doc, elements, IDQ)


class TestQdiQcr:
    def test_qdi_mean(self):
        scripts = [script_with_quotes(2), script_with_quotes(4), script_with_quotes(3)]
        assert qdi(scripts) == 3.0

    def test_qdi_all_zero(self):
        assert qdi([script_with_quotes(0), script_with_quotes(0)]) == 0.0

    def test_qcr_half(self):
        scripts = [script_with_quotes(1), script_with_quotes(0),
                   script_with_quotes(2), script_with_quotes(0)]
        assert qcr(scripts) == 50.0

    def test_qcr_full(self):
        assert qcr([script_with_quotes(1), script_with_quotes(3)]) == 100.0

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            qdi([])
        with pytest.raises(DataError):
            qcr([])

    def test_exact_against_direct_recomputation(self):
        rng = np.random.default_rng(83)
        for _ in range(25):
            counts = [int(rng.integers(0, 6)) for _ in range(int(rng.integers(1, 10)))]
            scripts = [script_with_quotes(c) for c in counts]
            assert qdi(scripts) == sum(counts) / len(counts)
            assert qcr(scripts) == 100.0 * sum(1 for c in counts if c) / len(counts)


class TestOverlapRatio:
    def test_hand_counted_fixture(self):
        matcher = lambda span, interviews: 0
        assert overlap_ratio(["the cat sat"], ["the cat sat down"], matcher) == 0.75

    def test_no_spans(self):
        assert overlap_ratio([], ["anything"], lambda s, i: 0) == 0.0

    def test_empty_base_rejected(self):
        with pytest.raises(DataError):
            overlap_ratio(["span"], [], lambda s, i: 0)

    def test_multiset_clipping(self):
        # span repeats a word more often than the interview supplies it
        matcher = lambda span, interviews: 0
        got = overlap_ratio(["go go go"], ["go go stop"], matcher)
        assert got == 2 / 3

    def test_bounded_by_one(self):
        rng = np.random.default_rng(89)
        vocab = [f"w{i}" for i in range(8)]
        embed = hash_text_embedder(12, seed=4)
        matcher = nearest_interview_matcher(embed)
        for _ in range(30):
            spans = [
                " ".join(rng.choice(vocab, size=rng.integers(1, 6)))
                for _ in range(int(rng.integers(0, 4)))
            ]
            base = [
                " ".join(rng.choice(vocab, size=rng.integers(1, 8)))
                for _ in range(int(rng.integers(1, 5)))
            ]
            value = overlap_ratio(spans, base, matcher)
            assert 0.0 <= value <= 1.0

    def test_nearest_matcher_picks_identical_interview(self):
        embed = hash_text_embedder(12, seed=4)
        matcher = nearest_interview_matcher(embed)
        base = ["something else entirely", "the exact span text", "another distractor"]
        assert matcher("the exact span text", base) == 1


# independent oracle: dict-based n-gram counts and a full-table LCS
def oracle_rouge(candidate, reference, variant):
    cand, ref = tokenize(candidate), tokenize(reference)
    if variant in (1, 2):
        def counts(tokens):
            table = {}
            for i in range(len(tokens) - variant + 1):
                key = tuple(tokens[i: i + variant])
                table[key] = table.get(key, 0) + 1
            return table

        ct, rt = counts(cand), counts(ref)
        overlap = 0
        for key in ct:
            if key in rt:
                overlap += ct[key] if ct[key] < rt[key] else rt[key]
        pred_total = sum(ct.values())
        ref_total = sum(rt.values())
    else:
        table = [[0] * (len(ref) + 1) for _ in range(len(cand) + 1)]
        for i in range(1, len(cand) + 1):
            for j in range(1, len(ref) + 1):
                if cand[i - 1] == ref[j - 1]:
                    table[i][j] = table[i - 1][j - 1] + 1
                else:
                    table[i][j] = max(table[i - 1][j], table[i][j - 1])
        overlap = table[-1][-1]
        pred_total, ref_total = len(cand), len(ref)
    p = overlap / pred_total if pred_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


class TestRouge:
    @pytest.mark.parametrize("variant", [1, 2, "L"])
    def test_identical_texts(self, variant):
        assert rouge("the same words here", "the same words here", variant) == 1.0

    @pytest.mark.parametrize("variant", [1, 2, "L"])
    def test_disjoint_texts(self, variant):
        assert rouge("alpha beta gamma", "delta epsilon zeta", variant) == 0.0

    def test_hand_derived_fixture(self):
        # P = 2/3, R = 1 -> F1 = 0.8
        assert rouge("the cat sat", "the cat", 1) == pytest.approx(0.8, abs=1e-15)

    @pytest.mark.parametrize("variant", [1, 2, "L"])
    def test_equals_oracle_exactly(self, variant):
        rng = np.random.default_rng(97)
        vocab = [f"t{i}" for i in range(6)]
        for _ in range(50):
            cand = " ".join(rng.choice(vocab, size=rng.integers(0, 15)))
            ref = " ".join(rng.choice(vocab, size=rng.integers(0, 15)))
            assert rouge(cand, ref, variant) == oracle_rouge(cand, ref, variant)

    def test_empty_vs_empty_is_zero(self):
        for variant in (1, 2, "L"):
            assert rouge("", "", variant) == 0.0

    def test_tokenization_strips_punctuation(self):
        assert rouge("The cat, sat!", "the cat sat", 1) == 1.0


def narration_entry(doc, start, end, text="spoken line", duration=None):
    return TimelineEntry(
        kind="narration", source_doc=doc, start_s=float(start), end_s=float(end),
        duration_s=duration if duration is not None else float(end - start), text=text,
    )


def quote_entry(doc, cid, start, end, text="quoted line"):
    return TimelineEntry(
        kind="quote", source_doc=doc, start_s=float(start), end_s=float(end),
        duration_s=float(end - start), text=text, clip_id=cid,
    )


class TestSceneChangeRate:
    def test_identical_frames_no_transitions(self):
        timeline = TeaserTimeline("d", (narration_entry("d", 0, 6),))
        lookup = {("d", s): np.array([1.0, 1.0]) for s in range(6)}
        assert scene_change_rate(timeline, lookup) == 0.0

    def test_alternating_orthogonal_frames(self):
        timeline = TeaserTimeline("d", (narration_entry("d", 0, 8),))
        e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        lookup = {("d", s): (e1 if s % 2 == 0 else e2) for s in range(8)}
        assert scene_change_rate(timeline, lookup) == 100.0

    def test_quote_counts_as_single_scene(self):
        timeline = TeaserTimeline("d", (quote_entry("d", "c1", 0, 10),))
        assert scene_change_rate(timeline, {}) == 0.0

    def test_entry_boundaries_count(self):
        timeline = TeaserTimeline(
            "d", (quote_entry("d", "c1", 0, 5), quote_entry("d", "c2", 10, 15))
        )
        # 10 frames, 9 pairs, 1 boundary transition
        assert scene_change_rate(timeline, {}) == pytest.approx(100.0 / 9)

    def test_too_few_frames(self):
        timeline = TeaserTimeline("d", (narration_entry("d", 0, 1),))
        with pytest.raises(DataError):
            scene_change_rate(timeline, {("d", 0): np.ones(2)})


class TestRepetitiveness:
    def test_all_distinct(self):
        timeline = TeaserTimeline(
            "d", (narration_entry("d", 0, 5), narration_entry("d", 5, 10))
        )
        assert repetitiveness(timeline) == 0.0

    def test_repeated_interval_half(self):
        timeline = TeaserTimeline(
            "d", (narration_entry("d", 0, 10), narration_entry("d", 0, 10))
        )
        assert repetitiveness(timeline) == 50.0

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            repetitiveness(TeaserTimeline("d", ()))


class TestInterviewRatio:
    def test_no_quotes(self):
        timeline = TeaserTimeline("d", (narration_entry("d", 0, 10),))
        assert interview_ratio(timeline) == 0.0

    def test_half_quote_time(self):
        timeline = TeaserTimeline(
            "d", (narration_entry("d", 0, 30), quote_entry("d", "c", 40, 70))
        )
        assert interview_ratio(timeline) == 50.0

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            interview_ratio(TeaserTimeline("d", ()))


class TestAlignment:
    def test_identical_frame_scores_one(self):
        t = np.array([0.5, 0.5])
        assert alignment_score(t, [np.array([0.0, 1.0]), t * 3]) == pytest.approx(1.0)

    def test_all_orthogonal_scores_zero(self):
        t = np.array([1.0, 0.0])
        assert alignment_score(t, [np.array([0.0, 1.0]), np.array([0.0, 2.0])]) == 0.0

    def test_split_by_entry_kind(self):
        embed_table = {"narr": np.array([1.0, 0.0]), "quot": np.array([0.0, 1.0])}
        embed = lambda text: embed_table[text]
        timeline = TeaserTimeline(
            "d",
            (
                narration_entry("d", 0, 2, text="narr"),
                quote_entry("d", "c", 2, 4, text="quot"),
            ),
        )
        lookup = {("d", s): np.array([1.0, 0.0]) for s in range(4)}
        ci, cn = clip_alignment_scores(timeline, embed, lookup)
        assert cn == pytest.approx(1.0)
        assert ci == pytest.approx(0.0)

    def test_entry_without_frames_rejected(self):
        with pytest.raises(DataError):
            alignment_score(np.ones(2), [])


class TestFrameF1:
    def test_identical(self):
        t = TeaserTimeline("d", (narration_entry("d", 0, 10),))
        assert frame_f1(t, t) == 100.0

    def test_disjoint(self):
        a = TeaserTimeline("d", (narration_entry("d", 0, 10),))
        b = TeaserTimeline("d", (narration_entry("d", 20, 30),))
        assert frame_f1(a, b) == 0.0

    def test_half_overlap(self):
        a = TeaserTimeline("d", (narration_entry("d", 0, 10),))
        b = TeaserTimeline("d", (narration_entry("d", 5, 15),))
        assert frame_f1(a, b) == 50.0

    def test_swap_symmetry(self):
        rng = np.random.default_rng(101)
        for _ in range(20):
            a = TeaserTimeline(
                "d", (narration_entry("d", int(rng.integers(0, 10)), int(rng.integers(11, 25))),)
            )
            b = TeaserTimeline(
                "d", (narration_entry("d", int(rng.integers(0, 10)), int(rng.integers(11, 25))),)
            )
            assert frame_f1(a, b) == frame_f1(b, a)

    def test_embedding_screen_matches_identity_when_planted(self):
        rng = np.random.default_rng(103)
        a = TeaserTimeline("d", (narration_entry("d", 0, 10),))
        b = TeaserTimeline("d", (narration_entry("d", 5, 15),))
        lookup = {("d", s): rng.standard_normal(6) for s in range(15)}
        matcher = top20_embedding_matcher(lookup)
        assert frame_f1(a, b, matcher) == frame_f1(a, b)

    def test_empty_truth_rejected(self):
        t = TeaserTimeline("d", (narration_entry("d", 0, 10),))
        with pytest.raises(DataError):
            frame_f1(t, TeaserTimeline("d", ()))


class TestReportCsv:
    def test_rows_and_mean(self, tmp_path):
        reports = {
            "docB": MetricReport(qdi=2.0, qcr_pct=100.0),
            "docA": MetricReport(qdi=4.0, qcr_pct=0.0, rouge1_f1=0.5),
        }
        path = tmp_path / "report.csv"
        write_report_csv(path, reports)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["doc_id"] + REPORT_FIELDS
        assert [r[0] for r in rows[1:]] == ["docA", "docB", "MEAN"]
        mean = dict(zip(rows[0], rows[-1]))
        assert float(mean["qdi"]) == 3.0
        assert float(mean["qcr_pct"]) == 50.0
        assert float(mean["rouge1_f1"]) == 0.5  # only one document reported it
        assert mean["frame_f1_pct"] == ""  # never computed, never fabricated
