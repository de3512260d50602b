#!/usr/bin/env python3
"""Unit tests for backoff n-gram language models."""

import math
import os
import random
import shutil
import sys
import tempfile
import unittest

import pytest

# Add the project root directory to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from pkg.ngram.arpa import export_arpa, import_arpa
from pkg.ngram.core import (
    BOS,
    EOS,
    LOG_ZERO,
    UNK,
    BackoffNGramLM,
    NGramEntry,
    interpolate,
    perplexity,
    score_sequence,
    train_ngram,
    word_prob,
)
from pkg.utils.errors import ArpaParse, BadConfig, BadWeight, EmptyCorpus


def bigram_corpus(seed: int, n_sentences: int = 80, n_words: int = 8):
    """Sentences from a random bigram generator over w0..w{n_words-1}."""
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(n_words)]
    successors = {w: rng.sample(words, 3) for w in [BOS] + words}
    corpus = []
    for _ in range(n_sentences):
        sentence, prev = [], BOS
        for _ in range(rng.randint(1, 7)):
            prev = rng.choice(successors[prev])
            sentence.append(prev)
        corpus.append(tuple(sentence))
    return corpus


def assert_normalized(test: unittest.TestCase, lm: BackoffNGramLM, tolerance: float = 1e-9):
    predicted = sorted(lm.vocab - {BOS})
    for context in lm.contexts():
        total = sum(10.0 ** word_prob(lm, context, w, map_unknown=False) for w in predicted)
        test.assertAlmostEqual(total, 1.0, delta=tolerance, msg=f"context {context}")


@pytest.mark.unit
class TestKneserNeyOracle(unittest.TestCase):
    """Hand-computed interpolated KN table for {"a b", "a b"}, order 2, D = 0.75."""

    def setUp(self):
        self.lm = train_ngram([("a", "b"), ("a", "b")], order=2, discount=0.75)

    def test_unigram_table(self):
        table = self.lm.tables[0]
        for word in ("a", "b", EOS):
            self.assertAlmostEqual(10.0 ** table[(word,)].logprob, 1.0 / 12.0, delta=1e-12)
        self.assertAlmostEqual(10.0 ** table[(UNK,)].logprob, 0.75, delta=1e-12)
        self.assertEqual(table[(BOS,)].logprob, LOG_ZERO)

    def test_bigram_table(self):
        table = self.lm.tables[1]
        self.assertEqual(sorted(table), [(BOS, "a"), ("a", "b"), ("b", EOS)])
        for entry in table.values():
            self.assertAlmostEqual(10.0 ** entry.logprob, 0.65625, delta=1e-12)
            self.assertIsNone(entry.backoff)

    def test_backoff_weights(self):
        table = self.lm.tables[0]
        for word in (BOS, "a", "b"):
            self.assertAlmostEqual(10.0 ** table[(word,)].backoff, 0.375, delta=1e-12)
        self.assertIsNone(table[(EOS,)].backoff)
        self.assertIsNone(table[(UNK,)].backoff)

    def test_score_of_training_sentence(self):
        expected = 3 * math.log10(0.65625)
        self.assertAlmostEqual(score_sequence(self.lm, ["a", "b"]), expected, delta=1e-9)

    def test_backed_off_score(self):
        # P(a | b) = 0.375 * 1/12
        self.assertAlmostEqual(word_prob(self.lm, ["b"], "a"), math.log10(0.375 / 12.0), delta=1e-12)

    def test_perplexity_of_training_sentence(self):
        self.assertAlmostEqual(perplexity(self.lm, [("a", "b")]), 1.0 / 0.65625, delta=1e-9)

    def test_oov_scored_as_unk(self):
        self.assertEqual(word_prob(self.lm, ["a"], "zzz"), word_prob(self.lm, ["a"], UNK))

    def test_normalized(self):
        assert_normalized(self, self.lm)


@pytest.mark.unit
class TestTrainNgram(unittest.TestCase):
    """Test cases for train_ngram and scoring."""

    def test_normalization_across_orders(self):
        for seed, order in [(1, 1), (2, 2), (3, 3), (4, 4), (5, 3)]:
            lm = train_ngram(bigram_corpus(seed), order=order)
            assert_normalized(self, lm)

    def test_log_probabilities_are_not_positive(self):
        lm = train_ngram(bigram_corpus(7), order=3)
        for table in lm.tables:
            for entry in table.values():
                self.assertLessEqual(entry.logprob, 0.0)

    def test_every_context_has_backoff(self):
        lm = train_ngram(bigram_corpus(9), order=4)
        for n in range(1, lm.order):
            for ngram in lm.tables[n]:
                self.assertIsNotNone(lm.tables[n - 1][ngram[:-1]].backoff)

    def test_backoff_arithmetic(self):
        lm = train_ngram(bigram_corpus(12), order=3)
        checked = 0
        for context, entry in lm.tables[1].items():
            if entry.backoff is None:
                continue
            for word in sorted(lm.vocab - {BOS}):
                if context + (word,) in lm.tables[2]:
                    continue
                expected = lm.tables[1][context].backoff + word_prob(lm, context[1:], word)
                self.assertAlmostEqual(word_prob(lm, context, word), expected, delta=1e-12)
                checked += 1
        self.assertGreater(checked, 0)

    def test_pooled_corpora(self):
        a = [("a", "b")]
        b = [("a", "b")]
        pooled = train_ngram(a, order=2, extra_corpora=[b])
        single = train_ngram(a + b, order=2)
        self.assertEqual(pooled.tables, single.tables)

    def test_unigram_over_single_word(self):
        lm = train_ngram([("a",)], order=1)
        self.assertEqual(score_sequence(lm, ["a"], eos=False), lm.tables[0][("a",)].logprob)

    def test_invalid_arguments(self):
        with self.assertRaises(EmptyCorpus):
            train_ngram([], order=3)
        with self.assertRaises(BadConfig):
            train_ngram([("a",)], order=7)
        with self.assertRaises(BadWeight):
            train_ngram([("a",)], order=2, discount=1.0)

    def test_uniform_model_perplexity(self):
        words = ["a", "b", "c", EOS]
        table = {(w,): NGramEntry(math.log10(0.25)) for w in words}
        table[(BOS,)] = NGramEntry(LOG_ZERO)
        lm = BackoffNGramLM(order=1, tables=(table,), vocab=frozenset(words + [BOS]))
        self.assertAlmostEqual(perplexity(lm, [("a", "b", "c"), ("c",)]), 4.0, delta=1e-9)

    def test_perplexity_of_empty_corpus_raises(self):
        lm = train_ngram([("a",)], order=1)
        with self.assertRaises(EmptyCorpus):
            perplexity(lm, [])

    def test_training_perplexity_below_held_out(self):
        lower = 0
        for split in range(20):
            corpus = bigram_corpus(100 + split, n_sentences=200)
            rng = random.Random(split)
            rng.shuffle(corpus)
            train, held_out = corpus[:100], corpus[100:]
            lm = train_ngram(train, order=3)
            if perplexity(lm, train) <= perplexity(lm, held_out):
                lower += 1
        self.assertGreaterEqual(lower, 16)


@pytest.mark.unit
class TestInterpolate(unittest.TestCase):
    """Test cases for interpolate."""

    def setUp(self):
        self.lm_a = train_ngram(bigram_corpus(31), order=3)
        self.lm_b = train_ngram(bigram_corpus(32, n_words=10), order=2)
        rng = random.Random(4)
        vocab = sorted((self.lm_a.vocab | self.lm_b.vocab) - {BOS, EOS})
        self.sequences = [[rng.choice(vocab) for _ in range(rng.randint(1, 8))] for _ in range(50)]

    def test_lambda_one_matches_first_model(self):
        mixed = interpolate(self.lm_a, self.lm_b, 1.0)
        self.assertEqual(mixed.order, 3)
        for seq in self.sequences:
            if all(w in self.lm_a.vocab for w in seq):
                self.assertAlmostEqual(score_sequence(mixed, seq), score_sequence(self.lm_a, seq), delta=1e-9)

    def test_lambda_zero_matches_second_model(self):
        mixed = interpolate(self.lm_a, self.lm_b, 0.0)
        for seq in self.sequences:
            if all(w in self.lm_b.vocab for w in seq):
                self.assertAlmostEqual(score_sequence(mixed, seq), score_sequence(self.lm_b, seq), delta=1e-9)

    def test_self_interpolation_is_identity(self):
        for lam in (0.0, 0.3, 0.5, 1.0):
            mixed = interpolate(self.lm_a, self.lm_a, lam)
            for seq in self.sequences:
                self.assertAlmostEqual(score_sequence(mixed, seq), score_sequence(self.lm_a, seq), delta=1e-9)

    def test_mixture_of_unigram_models(self):
        lm_a = train_ngram([("a", "b"), ("a",)], order=1)
        lm_b = train_ngram([("b", "c", "c")], order=1)
        mixed = interpolate(lm_a, lm_b, 0.5)
        for word in sorted(mixed.vocab - {BOS}):
            p_a = 10.0 ** word_prob(lm_a, [], word) if word in lm_a.vocab else 0.0
            p_b = 10.0 ** word_prob(lm_b, [], word) if word in lm_b.vocab else 0.0
            got = 10.0 ** word_prob(mixed, [], word, map_unknown=False)
            self.assertAlmostEqual(got, 0.5 * p_a + 0.5 * p_b, delta=1e-12)

    def test_interpolated_model_is_normalized(self):
        assert_normalized(self, interpolate(self.lm_a, self.lm_b, 0.4))

    def test_bad_lambda(self):
        with self.assertRaises(BadWeight):
            interpolate(self.lm_a, self.lm_b, 1.5)


@pytest.mark.unit
class TestArpa(unittest.TestCase):
    """Test cases for ARPA export and import."""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def _write(self, text):
        path = os.path.join(self.test_dir, "lm.arpa")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_round_trip_scores(self):
        lm = train_ngram(bigram_corpus(41), order=3)
        path = os.path.join(self.test_dir, "lm.arpa")
        export_arpa(lm, path)
        loaded = import_arpa(path)
        rng = random.Random(6)
        vocab = sorted(lm.vocab - {BOS, EOS}) + ["oov"]
        for _ in range(100):
            seq = [rng.choice(vocab) for _ in range(rng.randint(0, 10))]
            self.assertAlmostEqual(score_sequence(loaded, seq), score_sequence(lm, seq), delta=1e-6)

    def test_declared_counts_match_tables(self):
        lm = train_ngram(bigram_corpus(42), order=2)
        path = os.path.join(self.test_dir, "lm.arpa")
        export_arpa(lm, path)
        with open(path, encoding="utf-8") as f:
            lines = f.read().split("\n")
        self.assertEqual(lines[0], "\\data\\")
        self.assertEqual(lines[1], f"ngram 1={len(lm.tables[0])}")
        self.assertEqual(lines[2], f"ngram 2={len(lm.tables[1])}")

    def test_hand_written_unigram_file(self):
        path = self._write("\\data\\\nngram 1=3\n\n\\1-grams:\n-0.5\ta\n-0.25\t</s>\n-99\t<s>\n\n\\end\\\n")
        lm = import_arpa(path)
        self.assertEqual(lm.order, 1)
        self.assertEqual(lm.tables[0][("a",)].logprob, -0.5)
        self.assertEqual(lm.tables[0][(EOS,)].logprob, -0.25)
        self.assertEqual(score_sequence(lm, ["a"]), -0.75)

    def test_omitted_backoff_on_context_means_zero(self):
        path = self._write("\\data\\\nngram 1=4\nngram 2=2\n\n\\1-grams:\n-99\t<s>\t-0.3\n-0.5\ta\n"
                           "-0.6\tb\t-0.2\n-0.4\t</s>\n\n\\2-grams:\n-0.1\t<s> a\n-0.2\ta b\n\n\\end\\\n")
        lm = import_arpa(path)
        self.assertEqual(lm.tables[0][("a",)].backoff, 0.0)
        self.assertIn(("a",), set(lm.contexts()))
        self.assertIsNone(lm.tables[0][(EOS,)].backoff)
        self.assertIsNone(lm.tables[1][("a", "b")].backoff)
        # <s> a b </s>: -0.1 - 0.2 + (b backoff -0.2) + (</s> unigram -0.4)
        self.assertAlmostEqual(score_sequence(lm, ["a", "b"]), -0.9, delta=1e-12)

    def test_count_mismatch_reports_line(self):
        path = self._write("\\data\\\nngram 1=2\n\n\\1-grams:\n-0.5\ta\n\n\\end\\\n")
        with self.assertRaises(ArpaParse) as ctx:
            import_arpa(path)
        self.assertEqual(ctx.exception.line_number, 4)

    def test_bad_section_header_reports_line(self):
        path = self._write("\\data\\\nngram 1=1\n\n\\2-grams:\n-0.5\ta b\n\\end\\\n")
        with self.assertRaises(ArpaParse) as ctx:
            import_arpa(path)
        self.assertEqual(ctx.exception.line_number, 4)

    def test_missing_data_header(self):
        path = self._write("ngram 1=1\n")
        with self.assertRaises(ArpaParse) as ctx:
            import_arpa(path)
        self.assertEqual(ctx.exception.line_number, 1)


if __name__ == '__main__':
    unittest.main()
