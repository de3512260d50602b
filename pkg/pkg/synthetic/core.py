"""
A synthetic language with a known bigram generator, for end-to-end checks
without real audio: sentences, references and posteriorgrams with label noise.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from pkg.decoder.posteriorgram import DEFAULT_FRAME_RATE, Posteriorgram
from pkg.fst.graph import SILENCE, BiphoneTying
from pkg.utils.errors import BadConfig
from pkg.utils.logging import setup_secure_logging

logger = setup_secure_logging(__name__, logging.WARNING)

DEFAULT_ALPHABET = "abdilm"
DEFAULT_WORDS = 10
TARGET_BOOST = 4.0
DEFAULT_PAUSE_PROBABILITY = 0.2
DEFAULT_PAUSE_FRAMES = (5, 40)


@dataclass(frozen=True)
class SyntheticLanguage:
    """
    Words plus a bigram generator.

    Row i of ``transitions`` is the next-word distribution after word i; the
    last row is the distribution after sentence start and the last column is
    the end-of-sentence probability.
    """

    words: Tuple[str, ...]
    alphabet: str
    transitions: np.ndarray
    max_words: int = 6

    def sample_sentence(self, rng: np.random.Generator) -> Tuple[str, ...]:
        end = len(self.words)
        row = self.transitions[end]
        sentence: List[str] = []
        while True:
            # the first word is never end-of-sentence
            if not sentence:
                probs = row[:end] / row[:end].sum()
            else:
                probs = row
            choice = int(rng.choice(len(probs), p=probs))
            if choice == end or len(sentence) >= self.max_words:
                break
            sentence.append(self.words[choice])
            row = self.transitions[choice]
        return tuple(sentence)


def generate_language(seed: int, n_words: int = DEFAULT_WORDS, alphabet: str = DEFAULT_ALPHABET,
                      min_length: int = 2, max_length: int = 4, concentration: float = 0.3) -> SyntheticLanguage:
    """
    Draw ``n_words`` distinct words over ``alphabet`` and a peaked random bigram
    generator (Dirichlet rows with the given concentration).
    """
    if n_words < 1 or not alphabet or not 1 <= min_length <= max_length:
        raise BadConfig("need at least one word, a non-empty alphabet and 1 <= min_length <= max_length")
    capacity = sum(len(alphabet) ** k for k in range(min_length, max_length + 1))
    if n_words > capacity:
        raise BadConfig(f"cannot draw {n_words} distinct words from this alphabet")
    rng = np.random.default_rng(seed)
    words = set()
    while len(words) < n_words:
        length = int(rng.integers(min_length, max_length + 1))
        words.add("".join(alphabet[int(i)] for i in rng.integers(len(alphabet), size=length)))
    ordered = tuple(sorted(words))
    transitions = rng.dirichlet(np.full(n_words + 1, concentration), size=n_words + 1)
    return SyntheticLanguage(words=ordered, alphabet=alphabet, transitions=transitions)


def sample_corpus(language: SyntheticLanguage, n_sentences: int, seed: int) -> List[Tuple[str, ...]]:
    rng = np.random.default_rng(seed)
    return [language.sample_sentence(rng) for _ in range(n_sentences)]


def sample_pauses(n_words: int, seed: int, probability: float = DEFAULT_PAUSE_PROBABILITY,
                  frames: Tuple[int, int] = DEFAULT_PAUSE_FRAMES) -> Dict[int, int]:
    """Pause lengths in frames keyed by the index of the word they precede (``n_words`` means trailing)."""
    if not 0.0 <= probability <= 1.0:
        raise BadConfig(f"pause probability must be in [0, 1], got {probability}")
    rng = np.random.default_rng(seed)
    pauses = {}
    for i in range(n_words + 1):
        if rng.random() < probability:
            pauses[i] = int(rng.integers(frames[0], frames[1] + 1))
    return pauses


def synthesize_posteriorgram(utt_id: str, words: Sequence[str], lexicon: Mapping[str, Sequence[str]],
                             tying: BiphoneTying, label_noise: float, seed: int,
                             frames_per_unit: Tuple[int, int] = (2, 4),
                             frame_rate: float = DEFAULT_FRAME_RATE,
                             pauses: Optional[Mapping[int, int]] = None) -> Posteriorgram:
    """
    Scores for the tied-class sequence of ``words``.

    Each unit lasts a random number of frames.  ``pauses`` inserts that many
    silence frames before word i (i == len(words) for trailing silence); the
    tying must then carry the silence unit.  Per frame the target class (or,
    with probability ``label_noise``, a random class) gets a boost over Gaussian
    background scores; rows are log-softmax normalized.
    """
    if not 0.0 <= label_noise <= 1.0:
        raise BadConfig(f"label noise must be in [0, 1], got {label_noise}")
    pauses = {i: n for i, n in (pauses or {}).items() if n > 0}
    if pauses and SILENCE not in tying.units:
        raise BadConfig(f"{utt_id}: pauses need a tying with the {SILENCE} unit")
    rng = np.random.default_rng(seed)
    stream: List[Tuple[str, int]] = []
    for i, word in enumerate(words):
        if i in pauses:
            stream.append((SILENCE, pauses[i]))
        for unit in lexicon[word]:
            stream.append((unit, int(rng.integers(frames_per_unit[0], frames_per_unit[1] + 1))))
    if len(words) in pauses:
        stream.append((SILENCE, pauses[len(words)]))
    classes = tying.classify([unit for unit, _ in stream])
    labels = []
    for cls, (_, n_frames) in zip(classes, stream):
        labels.extend([cls] * n_frames)
    if not labels:
        raise BadConfig(f"{utt_id}: cannot synthesize an empty utterance")
    n_classes = tying.num_classes
    scores = rng.normal(0.0, 1.0, size=(len(labels), n_classes))
    for t, label in enumerate(labels):
        if rng.random() < label_noise:
            label = int(rng.integers(n_classes))
        scores[t, label] += TARGET_BOOST
    scores -= np.logaddexp.reduce(scores, axis=1, keepdims=True)
    return Posteriorgram(utt_id, scores.astype(np.float32), frame_rate)
