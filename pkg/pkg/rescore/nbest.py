"""
N-best extraction from lattices and second-pass rescoring.
"""

import heapq
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Set, Tuple, Union

from pkg.decoder.lattice import Lattice
from pkg.fst.core import EPSILON, ZERO
from pkg.ngram.core import BackoffNGramLM, score_sequence
from pkg.subword.core import SubwordModel, encode
from pkg.utils.errors import BadN, BadWeight, FstFormat
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

LN10 = math.log(10.0)
DEFAULT_N = 100


@dataclass(frozen=True)
class NBestEntry:
    """One hypothesis; costs are natural-log negatives as used by the decoder."""

    words: Tuple[str, ...]
    am_cost: float
    lm_cost: float
    start_frames: Tuple[int, ...] = ()

    @property
    def total(self) -> float:
        return self.am_cost + self.lm_cost


@dataclass(frozen=True)
class RescoredEntry:
    entry: NBestEntry
    new_lm_cost: float
    total: float

    @property
    def words(self) -> Tuple[str, ...]:
        return self.entry.words


def nbest(lattice: Lattice, n: Optional[int] = DEFAULT_N) -> List[NBestEntry]:
    """
    The ``n`` cheapest distinct word sequences of a lattice (all of them when n is None).

    A* search with exact backward costs.  A partial path reaching a state with a
    word prefix already expanded there is dominated and dropped, so each word
    sequence is reported once with its cheapest cost.

    Raises:
        BadN: when n < 1
    """
    if n is not None and n < 1:
        raise BadN(f"n must be at least 1, got {n}")
    if not lattice.arcs:
        return []
    beta = lattice.backward_costs()
    if beta[lattice.start] == ZERO:
        return []
    frames = lattice.state_frames()
    counter = itertools.count()
    # (estimate, tiebreak, state or -1 when complete, words, starts, am, lm)
    queue = [(beta[lattice.start], next(counter), lattice.start, (), (), 0.0, 0.0)]
    expanded: Set[Tuple[int, Tuple[str, ...]]] = set()
    seen: Set[Tuple[str, ...]] = set()
    results: List[NBestEntry] = []
    while queue and (n is None or len(results) < n):
        _, _, state, words, starts, am, lm = heapq.heappop(queue)
        if state < 0:
            if words not in seen:
                seen.add(words)
                results.append(NBestEntry(words, am, lm, starts))
            continue
        key = (state, words)
        if key in expanded:
            continue
        expanded.add(key)
        final = lattice.finals.get(state)
        if final is not None:
            f_am, f_lm = am + final[0], lm + final[1]
            heapq.heappush(queue, (f_am + f_lm, next(counter), -1, words, starts, f_am, f_lm))
        for arc in lattice.arcs[state]:
            rest = beta[arc.nextstate]
            if rest == ZERO:
                continue
            next_am, next_lm = am + arc.am, lm + arc.lm
            if arc.word != EPSILON:
                next_words, next_starts = words + (arc.word,), starts + (frames[state],)
            else:
                next_words, next_starts = words, starts
            heapq.heappush(queue, (next_am + next_lm + rest, next(counter), arc.nextstate,
                                   next_words, next_starts, next_am, next_lm))
    return results


class SequenceScorer(Protocol):
    def sequence_cost(self, tokens: Sequence[str]) -> float:
        """Negative natural-log probability of ``tokens`` followed by end of sentence."""


class NGramScorer:
    """Wraps a backoff LM so it scores in natural-log cost units."""

    def __init__(self, lm: BackoffNGramLM):
        self.lm = lm

    def sequence_cost(self, tokens: Sequence[str]) -> float:
        return -score_sequence(self.lm, tokens) * LN10


def _as_scorer(lm) -> SequenceScorer:
    if isinstance(lm, BackoffNGramLM):
        return NGramScorer(lm)
    return lm


def rescore_nbest(entries: Sequence[NBestEntry], new_lm: Union[BackoffNGramLM, SequenceScorer],
                  lm_scale: float, interp_lambda: float,
                  subword_model: Optional[SubwordModel] = None) -> List[RescoredEntry]:
    """
    Rerank with ``am + lm_scale * (lambda * new + (1 - lambda) * first_pass)``.

    The sort is stable, so equal totals keep their first-pass order.  With a
    subword model, words are BPE-encoded before scoring.

    Raises:
        BadWeight: for lambda outside [0, 1] or a negative or non-finite scale
        BadN: when there are no entries
    """
    if not 0.0 <= interp_lambda <= 1.0:
        raise BadWeight(f"interpolation weight must be in [0, 1], got {interp_lambda}")
    if not (math.isfinite(lm_scale) and lm_scale >= 0.0):
        raise BadWeight(f"LM scale must be finite and non-negative, got {lm_scale}")
    if not entries:
        raise BadN("nothing to rescore")
    scorer = _as_scorer(new_lm)
    rescored = []
    for entry in entries:
        tokens = encode(subword_model, entry.words) if subword_model is not None else entry.words
        new_cost = scorer.sequence_cost(tokens) if interp_lambda > 0.0 else 0.0
        lm_part = interp_lambda * new_cost + (1.0 - interp_lambda) * entry.lm_cost
        rescored.append(RescoredEntry(entry, new_cost, entry.am_cost + lm_scale * lm_part))
    rescored.sort(key=lambda r: r.total)
    return rescored


def write_nbest(lists: Dict[str, Sequence[NBestEntry]], path: str) -> None:
    """Write "utt-id rank am_cost lm_cost words..." lines (rank starts at 1)."""
    log_file_operation("writing n-best lists", path, logger)
    with atomic_write(path) as f:
        for utt_id, entries in lists.items():
            for rank, entry in enumerate(entries, 1):
                words = " ".join(entry.words)
                f.write(f"{utt_id} {rank} {entry.am_cost!r} {entry.lm_cost!r} {words}".rstrip() + "\n")


def read_nbest(path: str) -> Dict[str, List[NBestEntry]]:
    require_path(path)
    log_file_operation("reading n-best lists", path, logger)
    lists: Dict[str, List[NBestEntry]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 4:
                raise FstFormat(f"{path} line {line_number}: expected 'utt-id rank am_cost lm_cost words...'")
            try:
                am, lm = float(parts[2]), float(parts[3])
                int(parts[1])
            except ValueError as e:
                raise FstFormat(f"{path} line {line_number}: {e}")
            lists.setdefault(parts[0], []).append(NBestEntry(tuple(parts[4:]), am, lm))
    return lists
