#!/usr/bin/env python3
"""Unit tests for WER scoring."""

import os
import random
import shutil
import sys
import tempfile
import unittest

import editdistance
import pytest

# Add the project root directory to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from pkg.scorer.core import (
    DEL,
    INS,
    OK,
    SUB,
    align,
    compute_wer,
    format_alignment,
    format_report,
    read_transcripts,
    score_utterance,
    write_report_tsv,
)
from pkg.utils.errors import DuplicateUtterance, EmptyReference, MissingReference

TOKENS = ["a", "b", "c", "a'", "'b"]


def random_words(rng: random.Random, max_len: int = 8):
    return [rng.choice(TOKENS) for _ in range(rng.randint(0, max_len))]


@pytest.mark.unit
class TestAlignment(unittest.TestCase):

    def test_substitution_and_insertion(self):
        pairs = align("a b c".split(), "a x c d".split())
        self.assertEqual([p.tag for p in pairs], [OK, SUB, OK, INS])
        self.assertEqual(pairs[-1].ref, None)

    def test_deletion(self):
        pairs = align("a b c".split(), "a c".split())
        self.assertEqual([p.tag for p in pairs], [OK, DEL, OK])

    def test_empty_sides(self):
        self.assertEqual([p.tag for p in align([], ["a"])], [INS])
        self.assertEqual([p.tag for p in align(["a"], [])], [DEL])
        self.assertEqual(align([], []), [])

    def test_matches_independent_edit_distance(self):
        rng = random.Random(3)
        for _ in range(1000):
            ref, hyp = random_words(rng), random_words(rng)
            score = score_utterance("u", ref, hyp)
            self.assertEqual(score.errors, editdistance.eval(ref, hyp))
            self.assertEqual(score.ref_length, len(ref))

    def test_triangle_inequality(self):
        rng = random.Random(5)
        for _ in range(300):
            a, b, c = random_words(rng), random_words(rng), random_words(rng)
            ab = score_utterance("u", a, b).errors
            bc = score_utterance("u", b, c).errors
            ac = score_utterance("u", a, c).errors
            self.assertLessEqual(ac, ab + bc)


@pytest.mark.unit
class TestComputeWer(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_two_errors_over_three_words(self):
        report = compute_wer({"u1": "a b c".split()}, {"u1": "a x c d".split()})
        self.assertAlmostEqual(report.wer, 2 / 3)
        self.assertEqual((report.substitutions, report.deletions, report.insertions), (1, 0, 1))

    def test_identical_corpora(self):
        refs = {"u1": ["a", "b"], "u2": ["c"]}
        self.assertEqual(compute_wer(refs, dict(refs)).wer, 0.0)

    def test_apostrophe_leniency(self):
        refs = {"u1": ["a'", "bhùth"]}
        hyps = {"u1": ["a", "bhùth"]}
        self.assertEqual(compute_wer(refs, hyps, lenient_apostrophe=True).wer, 0.0)
        self.assertEqual(compute_wer(refs, hyps).wer, 0.5)

    def test_apostrophe_only_insertion_is_not_forgiven(self):
        report = compute_wer({"u1": ["a"]}, {"u1": ["a", "'"]}, lenient_apostrophe=True)
        self.assertEqual(report.insertions, 1)

    def test_leniency_never_increases_wer(self):
        rng = random.Random(11)
        for _ in range(300):
            ref = random_words(rng)
            if not ref:
                continue
            hyp = random_words(rng)
            strict = compute_wer({"u": ref}, {"u": hyp}).errors
            lenient = compute_wer({"u": ref}, {"u": hyp}, lenient_apostrophe=True).errors
            self.assertLessEqual(lenient, strict)

    def test_case_is_ignored(self):
        self.assertEqual(compute_wer({"u": ["Alba"]}, {"u": ["alba"]}).wer, 0.0)

    def test_missing_hypothesis_counts_as_deletions(self):
        report = compute_wer({"u1": ["a", "b"], "u2": ["c"]}, {"u1": ["a", "b"]})
        self.assertEqual(report.deletions, 1)
        self.assertAlmostEqual(report.wer, 1 / 3)

    def test_errors(self):
        with self.assertRaises(MissingReference):
            compute_wer({"u1": ["a"]}, {"u1": ["a"], "u2": ["b"]})
        with self.assertRaises(EmptyReference):
            compute_wer({"u1": []}, {"u1": ["a"]})

    def test_workers_give_same_report(self):
        rng = random.Random(2)
        refs = {f"u{i}": random_words(rng) + ["a"] for i in range(40)}
        hyps = {k: random_words(rng) for k in refs}
        serial = compute_wer(refs, hyps)
        parallel = compute_wer(refs, hyps, workers=4)
        self.assertEqual(format_report(serial), format_report(parallel))
        self.assertEqual([u.utt_id for u in parallel.utterances], list(refs))

    def test_report_text(self):
        report = compute_wer({"u1": "a b c".split()}, {"u1": "a x c d".split()})
        self.assertEqual(format_report(report), "WER 66.67% [ 2 / 3, 1 ins, 0 del, 1 sub ]")
        lines = format_alignment(report.utterances[0]).splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[0].startswith("REF:"))
        self.assertIn("*", lines[0])

    def test_report_tsv_and_transcripts(self):
        ref_path = os.path.join(self.temp_dir, "ref.txt")
        with open(ref_path, "w", encoding="utf-8") as f:
            f.write("u1\ta b c\nu2\td\n")
        refs = read_transcripts(ref_path)
        self.assertEqual(refs, {"u1": ["a", "b", "c"], "u2": ["d"]})
        report = compute_wer(refs, {"u1": ["a", "b"], "u2": ["d"]})
        out = os.path.join(self.temp_dir, "report.tsv")
        write_report_tsv(report, out)
        with open(out, encoding="utf-8") as f:
            lines = f.read().splitlines()
        self.assertEqual(lines, ["utt_id\tS\tD\tI\tN", "u1\t0\t1\t0\t3", "u2\t0\t0\t0\t1"])

    def test_duplicate_utterance_id(self):
        path = os.path.join(self.temp_dir, "hyp.txt")
        with open(path, "w", encoding="utf-8") as f:
            f.write("u1\ta b\nu2\tc\nu1\td\n")
        with self.assertRaises(DuplicateUtterance):
            read_transcripts(path)


if __name__ == '__main__':
    unittest.main()
