#!/usr/bin/env python3
"""Unit tests for text normalization."""

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

from pkg.textnorm.core import (
    DEFAULT_RULES,
    NormalizationRules,
    load_rules,
    normalize_text,
    read_corpus,
    strip_edge_apostrophes,
    write_corpus,
)
from pkg.utils.errors import BadConfig, EmptyToken


def _random_text(rng: random.Random, length: int) -> str:
    pools = [
        "abcdefghilmnoprstu",
        "àèìòùáéíóú",
        "ÀÉÌÓÙXYZkqvwxyz",
        "0123456789",
        "'’-.,!?;:\"()",
        "  \t",
        "ßİĲœ漢字ž́",
    ]
    return "".join(rng.choice(rng.choice(pools)) for _ in range(length))


@pytest.mark.unit
class TestNormalizeText(unittest.TestCase):
    """Test cases for normalize_text."""

    def test_acute_accent_is_mapped_to_grave(self):
        self.assertEqual(normalize_text("Á mhàthair").tokens, ("à", "mhàthair"))

    def test_non_gaelic_word_becomes_noise(self):
        self.assertEqual(normalize_text("taxi math").tokens, ("<spn>", "math"))

    def test_empty_input(self):
        self.assertEqual(normalize_text("").tokens, ())

    def test_digits_become_noise(self):
        self.assertEqual(normalize_text("bus 52").tokens, ("bus", "<spn>"))

    def test_punctuation_removed_and_apostrophes_kept(self):
        utt = normalize_text("  Tha, d'fhàg   e! ")
        self.assertEqual(utt.tokens, ("tha", "d'fhàg", "e"))
        self.assertEqual(utt.text, "tha d'fhàg e")

    def test_decomposed_input_is_composed(self):
        # "a" followed by a combining grave accent
        self.assertEqual(normalize_text("ma\u0300").tokens, ("m\u00e0",))

    def test_noise_token_passes_through(self):
        self.assertEqual(normalize_text("<spn> agus").tokens, ("<spn>", "agus"))

    def test_source_id_is_carried(self):
        self.assertEqual(normalize_text("agus", source_id="utt7").source_id, "utt7")

    def test_idempotence_on_random_text(self):
        rng = random.Random(11)
        for _ in range(300):
            raw = _random_text(rng, rng.randint(0, 40))
            once = normalize_text(raw)
            twice = normalize_text(once.text)
            self.assertEqual(once.tokens, twice.tokens, msg=repr(raw))

    def test_output_alphabet_closure(self):
        rng = random.Random(5)
        allowed = DEFAULT_RULES.allowed_chars()
        for _ in range(300):
            for token in normalize_text(_random_text(rng, rng.randint(0, 40))).tokens:
                if token == DEFAULT_RULES.noise_token:
                    continue
                self.assertTrue(all(ch in allowed for ch in token), msg=repr(token))


@pytest.mark.unit
class TestStripEdgeApostrophes(unittest.TestCase):
    """Test cases for strip_edge_apostrophes."""

    def test_trailing(self):
        self.assertEqual(strip_edge_apostrophes("a'"), "a")

    def test_interior_untouched(self):
        self.assertEqual(strip_edge_apostrophes("d'fhàg"), "d'fhàg")

    def test_both_edges(self):
        self.assertEqual(strip_edge_apostrophes("'s'"), "s")

    def test_typographic_apostrophe(self):
        self.assertEqual(strip_edge_apostrophes("’s"), "s")

    def test_empty_raises(self):
        with self.assertRaises(EmptyToken):
            strip_edge_apostrophes("")

    def test_idempotent_and_never_longer(self):
        for word in ["a'", "'s'", "''", "d'fhàg", "’a’b’", "math"]:
            once = strip_edge_apostrophes(word)
            self.assertLessEqual(len(once), len(word))
            if once:
                self.assertEqual(strip_edge_apostrophes(once), once)


@pytest.mark.unit
class TestRulesAndCorpusFiles(unittest.TestCase):
    """Test cases for rules loading and corpus I/O."""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def _write(self, name, text):
        path = os.path.join(self.test_dir, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_load_rules_from_textnorm_table(self):
        path = self._write("rules.toml", (
            "[textnorm]\n"
            "letter_set = \"abc\"\n"
            "noise_token = \"<noise>\"\n"
            "[textnorm.accent_map]\n"
            "\"á\" = \"a\"\n"
        ))
        rules = load_rules(path)
        self.assertEqual(rules.letter_set, frozenset("abc"))
        self.assertEqual(normalize_text("Ába cd", rules).tokens, ("aba", "<noise>"))

    def test_uppercase_accent_keys_match_lowercased_text(self):
        path = self._write("rules.toml", "letter_set = \"abcà\"\n[accent_map]\n\"Á\" = \"à\"\n")
        rules = load_rules(path)
        self.assertEqual(rules.accent_map, {"á": "à"})
        self.assertEqual(normalize_text("Ába cÁb", rules).tokens, ("àba", "càb"))

    def test_invalid_accent_map_is_rejected(self):
        path = self._write("rules.toml", "letter_set = \"abc\"\n[accent_map]\n\"á\" = \"z\"\n")
        with self.assertRaises(BadConfig):
            load_rules(path)

    def test_empty_letter_set_is_rejected(self):
        with self.assertRaises(ValueError):
            NormalizationRules(letter_set="")

    def test_corpus_round_trip(self):
        path = self._write("corpus.txt", "s1\tTha mi sgìth.\n\nCiamar a tha thu?\n")
        utterances = read_corpus(path)
        self.assertEqual([u.source_id for u in utterances], ["s1", "utt000003"])
        self.assertEqual(utterances[1].tokens, ("ciamar", "a", "tha", "thu"))

        out = os.path.join(self.test_dir, "out.txt")
        write_corpus(utterances, out)
        self.assertEqual(read_corpus(out), utterances)


if __name__ == '__main__':
    unittest.main()
