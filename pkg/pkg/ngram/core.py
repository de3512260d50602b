"""
Backoff n-gram language models: interpolated Kneser-Ney estimation with a
single fixed discount, backoff scoring, perplexity and linear interpolation.

Probabilities are stored as log10 values, as in ARPA files.
"""

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

from pkg.textnorm.core import NormalizedUtterance
from pkg.utils.errors import BadConfig, BadWeight, EmptyCorpus
from pkg.utils.logging import setup_secure_logging

logger = setup_secure_logging(__name__, logging.WARNING)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
LOG_ZERO = -99.0
MAX_ORDER = 6
DEFAULT_DISCOUNT = 0.75

NGram = Tuple[str, ...]
Sentences = Iterable[Union[NormalizedUtterance, Sequence[str]]]


class NGramEntry(NamedTuple):
    logprob: float
    backoff: Optional[float] = None


@dataclass(frozen=True)
class BackoffNGramLM:
    """
    Backoff n-gram model.

    ``tables[n - 1]`` maps each stored n-gram to its log10 probability and,
    for n-grams that are contexts of longer ones, its log10 backoff weight.
    """

    order: int
    tables: Tuple[Dict[NGram, NGramEntry], ...]
    vocab: FrozenSet[str]

    def counts(self) -> List[int]:
        return [len(table) for table in self.tables]

    def contexts(self) -> List[NGram]:
        """Histories that predict a next word (stored n-grams carrying a backoff, plus the empty one)."""
        result: List[NGram] = [()]
        for table in self.tables[:-1]:
            for ngram, entry in sorted(table.items()):
                if entry.backoff is not None and ngram[-1] != EOS:
                    result.append(ngram)
        return result


def _sentences(corpus: Sentences) -> List[Tuple[str, ...]]:
    result = []
    for item in corpus:
        tokens = item.tokens if isinstance(item, NormalizedUtterance) else item
        result.append(tuple(tokens))
    return result


def _lookup(tables: Sequence[Dict[NGram, NGramEntry]], history: NGram, word: str) -> float:
    acc = 0.0
    while True:
        entry = tables[len(history)].get(history + (word,))
        if entry is not None:
            return acc + entry.logprob
        if not history:
            return LOG_ZERO
        context = tables[len(history) - 1].get(history)
        if context is not None and context.backoff is not None:
            acc += context.backoff
        history = history[1:]


def word_prob(lm: BackoffNGramLM, history: Sequence[str], word: str,
                 map_unknown: bool = True) -> float:
    """
    log10 P(word | history) with the standard backoff recursion.

    Args:
        lm: Model
        history: Preceding tokens (only the last order-1 are used)
        word: Predicted token
        map_unknown: Score out-of-vocabulary words as ``<unk>``; otherwise they get LOG_ZERO

    Returns:
        log10 probability
    """
    if word not in lm.vocab:
        if not map_unknown:
            return LOG_ZERO
        word = UNK
    keep = lm.order - 1
    hist = tuple(t if t in lm.vocab else UNK for t in history[len(history) - keep:]) if keep > 0 else ()
    return _lookup(lm.tables, hist, word)


def score_sequence(lm: BackoffNGramLM, tokens: Sequence[str], bos: bool = True,
                   eos: bool = True) -> float:
    """
    Total log10 probability of a token sequence.

    Args:
        lm: Model
        tokens: Tokens to score
        bos: Condition the first token on ``<s>``
        eos: Include the ``</s>`` prediction

    Returns:
        Sum of log10 probabilities
    """
    history: List[str] = [BOS] if bos else []
    total = 0.0
    targets = list(tokens) + ([EOS] if eos else [])
    for word in targets:
        total += word_prob(lm, history, word)
        history.append(word)
    return total


def perplexity(lm: BackoffNGramLM, corpus: Sentences) -> float:
    """
    Perplexity over a corpus, counting one ``</s>`` per sentence.

    Raises:
        EmptyCorpus: if the corpus has no sentences
    """
    sentences = _sentences(corpus)
    if not sentences:
        raise EmptyCorpus("cannot compute perplexity of an empty corpus")
    total = 0.0
    count = 0
    for sentence in sentences:
        total += score_sequence(lm, sentence)
        count += len(sentence) + 1
    return 10.0 ** (-total / count)


def _kn_counts(sentences: List[Tuple[str, ...]], order: int) -> List[Dict[NGram, int]]:
    raw: List[Counter] = [Counter() for _ in range(order)]
    for sentence in sentences:
        padded = (BOS,) + sentence + (EOS,)
        for i in range(len(padded)):
            for n in range(1, order + 1):
                if i + n > len(padded):
                    break
                raw[n - 1][padded[i:i + n]] += 1

    counts: List[Dict[NGram, int]] = [dict() for _ in range(order)]
    counts[order - 1] = dict(raw[order - 1])
    for n in range(order - 1, 0, -1):
        continuation: Counter = Counter()
        for longer in raw[n]:
            continuation[longer[1:]] += 1
        table = counts[n - 1]
        for ngram, count in raw[n - 1].items():
            # n-grams starting at <s> have no left context; keep raw counts
            table[ngram] = count if ngram[0] == BOS else continuation[ngram]
    return counts


def train_ngram(corpus: Sentences, order: int = 3, discount: float = DEFAULT_DISCOUNT,
                extra_corpora: Iterable[Sentences] = ()) -> BackoffNGramLM:
    """
    Estimate an interpolated Kneser-Ney model with one fixed discount.

    Lower orders use continuation counts, the unigram discount mass goes to
    ``<unk>``, and the result is stored in backoff form.

    Args:
        corpus: Token sequences
        order: Maximum n-gram order (1-6)
        discount: Absolute discount D in (0, 1)
        extra_corpora: Further corpora pooled with the first

    Returns:
        Trained BackoffNGramLM
    """
    if not 1 <= order <= MAX_ORDER:
        raise BadConfig(f"order must be between 1 and {MAX_ORDER}, got {order}")
    if not 0.0 < discount < 1.0:
        raise BadWeight(f"discount must be in (0, 1), got {discount}")
    sentences = _sentences(corpus)
    for extra in extra_corpora:
        sentences.extend(_sentences(extra))
    if not sentences:
        raise EmptyCorpus("cannot train an n-gram model on an empty corpus")

    counts = _kn_counts(sentences, order)
    probs: List[Dict[NGram, float]] = [dict() for _ in range(order)]
    gammas: List[Dict[NGram, float]] = [dict() for _ in range(order)]

    unigrams = {g: c for g, c in counts[0].items() if g != (BOS,)}
    total = sum(unigrams.values())
    for ngram, count in unigrams.items():
        probs[0][ngram] = (count - discount) / total
    leftover = discount * len(unigrams) / total
    probs[0][(UNK,)] = probs[0].get((UNK,), 0.0) + leftover

    for n in range(2, order + 1):
        by_context: Dict[NGram, List[Tuple[str, int]]] = defaultdict(list)
        for ngram, count in counts[n - 1].items():
            by_context[ngram[:-1]].append((ngram[-1], count))
        for context, followers in by_context.items():
            context_total = sum(c for _, c in followers)
            gamma = discount * len(followers) / context_total
            gammas[n - 2][context] = gamma
            for word, count in followers:
                lower = probs[n - 2][context[1:] + (word,)]
                probs[n - 1][context + (word,)] = (count - discount) / context_total + gamma * lower

    tables: List[Dict[NGram, NGramEntry]] = []
    for n in range(order):
        table: Dict[NGram, NGramEntry] = {}
        keys = set(probs[n]) | set(gammas[n])
        if n == 0:
            keys.add((BOS,))
        for ngram in sorted(keys):
            p = probs[n].get(ngram)
            logprob = math.log10(p) if p else LOG_ZERO
            gamma = gammas[n].get(ngram)
            table[ngram] = NGramEntry(logprob, math.log10(gamma) if gamma is not None else None)
        tables.append(table)

    vocab = frozenset({w for s in sentences for w in s} | {BOS, EOS, UNK})
    logger.info(f"Trained {order}-gram KN model: counts {[len(t) for t in tables]}")
    return BackoffNGramLM(order=order, tables=tuple(tables), vocab=vocab)


def _prob(lm: BackoffNGramLM, history: NGram, word: str) -> float:
    if word not in lm.vocab:
        return 0.0
    logprob = word_prob(lm, history, word, map_unknown=False)
    return 0.0 if logprob <= LOG_ZERO else 10.0 ** logprob


def interpolate(lm_a: BackoffNGramLM, lm_b: BackoffNGramLM, lam: float) -> BackoffNGramLM:
    """
    Linear interpolation lam * P_a + (1 - lam) * P_b over the union of n-grams.

    Backoff weights are recomputed so every context stays normalized.

    Args:
        lm_a: First model
        lm_b: Second model
        lam: Weight of lm_a in [0, 1]

    Returns:
        Interpolated model of order max(lm_a.order, lm_b.order)
    """
    if not 0.0 <= lam <= 1.0:
        raise BadWeight(f"interpolation weight must be in [0, 1], got {lam}")
    order = max(lm_a.order, lm_b.order)
    keys: List[set] = []
    for n in range(order):
        level = set()
        for lm in (lm_a, lm_b):
            if n < lm.order:
                level.update(lm.tables[n])
        keys.append(level)

    tables: List[Dict[NGram, NGramEntry]] = [dict() for _ in range(order)]
    for n in range(order):
        for ngram in sorted(keys[n]):
            history, word = ngram[:-1], ngram[-1]
            if word == BOS:
                tables[n][ngram] = NGramEntry(LOG_ZERO)
                continue
            p = lam * _prob(lm_a, history, word) + (1.0 - lam) * _prob(lm_b, history, word)
            tables[n][ngram] = NGramEntry(math.log10(p) if p > 0.0 else LOG_ZERO)
        if n == 0:
            continue
        followers: Dict[NGram, List[str]] = defaultdict(list)
        for ngram in keys[n]:
            followers[ngram[:-1]].append(ngram[-1])
        for context in sorted(followers):
            words = followers[context]
            explicit = sum(10.0 ** tables[n][context + (w,)].logprob for w in words
                           if tables[n][context + (w,)].logprob > LOG_ZERO)
            lower = 0.0
            for w in words:
                logprob = _lookup(tables, context[1:], w)
                if logprob > LOG_ZERO:
                    lower += 10.0 ** logprob
            numerator, denominator = 1.0 - explicit, 1.0 - lower
            if numerator <= 0.0:
                backoff = LOG_ZERO
            elif denominator <= 0.0:
                backoff = 0.0
            else:
                backoff = math.log10(numerator / denominator)
            entry = tables[n - 1].get(context)
            if entry is None:
                # history missing at the lower order; keep the table prefix-closed
                entry = NGramEntry(LOG_ZERO)
            tables[n - 1][context] = NGramEntry(entry.logprob, backoff)

    logger.info(f"Interpolated models with lambda={lam}: counts {[len(t) for t in tables]}")
    return BackoffNGramLM(order=order, tables=tuple(tables), vocab=lm_a.vocab | lm_b.vocab)
