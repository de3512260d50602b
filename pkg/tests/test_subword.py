#!/usr/bin/env python3
"""Unit tests for BPE subword units."""

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

from pkg.subword.core import decode, encode, load_model, save_model, train_bpe
from pkg.textnorm.core import normalize_text
from pkg.utils.errors import EmptyCorpus, EmptyToken, ModelFormat, UnknownUnit, VocabTooSmall


def _random_corpus(seed: int, n_lines: int = 60):
    rng = random.Random(seed)
    syllables = ["ba", "ch", "dh", "ai", "ea", "mh", "ir", "ò", "an", "t"]
    words = ["".join(rng.choice(syllables) for _ in range(rng.randint(1, 4))) for _ in range(40)]
    return [tuple(rng.choice(words) for _ in range(rng.randint(1, 8))) for _ in range(n_lines)]


@pytest.mark.unit
class TestTrainBpe(unittest.TestCase):
    """Test cases for train_bpe."""

    def test_single_merge(self):
        model = train_bpe([normalize_text("aa aa ab")], vocab_size=3)
        self.assertEqual(model.merges, (("a", "a"),))
        self.assertEqual(model.inventory, frozenset({"a", "b", "aa"}))

    def test_vocab_equal_to_base_gives_no_merges(self):
        model = train_bpe([("aa", "aa", "ab")], vocab_size=2)
        self.assertEqual(model.merges, ())

    def test_vocab_below_base_raises(self):
        with self.assertRaises(VocabTooSmall):
            train_bpe([("aa", "ab")], vocab_size=1)

    def test_empty_corpus_raises(self):
        with self.assertRaises(EmptyCorpus):
            train_bpe([], vocab_size=10)

    def test_stops_when_no_pair_repeats(self):
        model = train_bpe([("ab",)], vocab_size=50)
        self.assertEqual(model.merges, ())

    def test_ties_broken_by_concatenation(self):
        # (a,b) and (c,d) both occur twice
        model = train_bpe([("cd", "ab", "cd", "ab")], vocab_size=5)
        self.assertEqual(model.merges, (("a", "b"),))

    def test_inventory_bounded_and_consistent(self):
        corpus = _random_corpus(3)
        model = train_bpe(corpus, vocab_size=25)
        self.assertLessEqual(len(model.inventory), 25)
        base = {ch for line in corpus for w in line for ch in w}
        self.assertTrue(base <= model.inventory)
        self.assertLessEqual(len(model.inventory), len(base) + len(model.merges))
        for left, right in model.merges:
            self.assertIn(left + right, model.inventory)

    def test_deterministic(self):
        corpus = _random_corpus(8)
        self.assertEqual(train_bpe(corpus, 30).merges, train_bpe(corpus, 30).merges)

    def test_special_tokens_are_reserved(self):
        model = train_bpe([("<spn>", "math", "math")], vocab_size=6)
        self.assertIn("<spn>", model.reserved)
        self.assertNotIn("<", model.inventory)
        self.assertEqual(encode(model, ["<spn>"]), ["▁<spn>"])


@pytest.mark.unit
class TestEncodeDecode(unittest.TestCase):
    """Test cases for encode and decode."""

    def setUp(self):
        self.model = train_bpe([("aa", "aa", "ab")], vocab_size=3)

    def test_encode_applies_merge(self):
        self.assertEqual(encode(self.model, ["aab"]), ["▁aa", "b"])

    def test_encode_empty(self):
        self.assertEqual(encode(self.model, []), [])

    def test_empty_word_is_rejected(self):
        for mark in (True, False):
            with self.assertRaises(EmptyToken):
                encode(self.model, ["aa", ""], mark_boundaries=mark)

    def test_unknown_character(self):
        self.assertEqual(encode(self.model, ["q"]), ["▁<unk>"])

    def test_encode_without_boundaries(self):
        self.assertEqual(encode(self.model, ["aab", "b"], mark_boundaries=False), ["aa", "b", "b"])

    def test_decode(self):
        self.assertEqual(decode(self.model, ["▁aa", "b"]), ["aab"])
        self.assertEqual(decode(self.model, []), [])
        self.assertEqual(decode(self.model, ["▁a", "▁b"]), ["a", "b"])

    def test_decode_unknown_unit_raises(self):
        with self.assertRaises(UnknownUnit):
            decode(self.model, ["▁zz"])

    def test_round_trip_over_training_words(self):
        corpus = _random_corpus(21)
        model = train_bpe(corpus, vocab_size=40)
        words = sorted({w for line in corpus for w in line})
        for word in words:
            self.assertEqual(decode(model, encode(model, [word])), [word])
        self.assertEqual(decode(model, encode(model, words)), words)

    def test_larger_vocab_never_lengthens_encoding(self):
        corpus = _random_corpus(4)
        words = sorted({w for line in corpus for w in line})
        previous = None
        for size in (15, 20, 30, 45, 80):
            model = train_bpe(corpus, vocab_size=size)
            lengths = [len(encode(model, [w])) for w in words]
            if previous is not None:
                for before, after in zip(previous, lengths):
                    self.assertLessEqual(after, before)
            previous = lengths


@pytest.mark.unit
class TestModelFile(unittest.TestCase):
    """Test cases for model save/load."""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_save_load_is_bit_exact(self):
        model = train_bpe(_random_corpus(2) + [("<spn>",)], vocab_size=30)
        path = os.path.join(self.test_dir, "bpe.model")
        save_model(model, path)
        loaded = load_model(path)
        self.assertEqual(loaded, model)

        again = os.path.join(self.test_dir, "bpe2.model")
        save_model(loaded, again)
        with open(path, "rb") as a, open(again, "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_bad_header_raises(self):
        path = os.path.join(self.test_dir, "bad.model")
        with open(path, "w", encoding="utf-8") as f:
            f.write("not a model\n")
        with self.assertRaises(ModelFormat):
            load_model(path)


if __name__ == '__main__':
    unittest.main()
