"""
Decoding-graph construction: grammar (G), lexicon (L), biphone context (C),
frame topology (H) and their composition into HCLG.
"""

import logging
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from pkg.fst.core import (
    DEFAULT_DETERMINIZE_MULTIPLIER,
    EPS_ID,
    ONE,
    SymbolTable,
    WeightedFst,
    compose,
    connect,
    determinize,
    read_fst,
    rm_epsilon,
    write_fst,
)
from pkg.ngram.core import BOS, EOS, LOG_ZERO, BackoffNGramLM, NGram
from pkg.subword.core import SubwordModel, encode, is_special
from pkg.utils.errors import DeterminizeBlowup, EmptyGraph, EmptyPron, FstFormat
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

LN10 = math.log(10.0)
SEQUENCE_START = "<b>"
# optional pause unit between words; it never carries a word label
SILENCE = "<sil>"

Lexicon = Dict[str, Tuple[str, ...]]


def _cost(log10_value: float) -> float:
    return -log10_value * LN10


def grammar_fst(lm: BackoffNGramLM, words: Optional[SymbolTable] = None) -> WeightedFst:
    """
    Build G: one state per LM context, word arcs weighted -ln P, epsilon backoff
    arcs weighted -ln(backoff), and ``</s>`` as final weights.

    Args:
        lm: Backoff model
        words: Word symbol table (built from the sorted LM vocabulary if None)

    Returns:
        Acceptor over words
    """
    if words is None:
        words = SymbolTable(sorted(lm.vocab - {BOS, EOS}))
    fst = WeightedFst(words, words)
    contexts = lm.contexts()
    states: Dict[NGram, int] = {context: fst.add_state() for context in contexts}

    def state_for(history: NGram) -> int:
        history = history[len(history) - (lm.order - 1):] if lm.order > 1 else ()
        while history not in states:
            history = history[1:]
        return states[history]

    start = (BOS,) if (BOS,) in states else ()
    fst.set_start(states[start])

    followers: Dict[NGram, List[Tuple[str, float]]] = defaultdict(list)
    for table in lm.tables:
        for ngram in sorted(table):
            if ngram[:-1] in states:
                followers[ngram[:-1]].append((ngram[-1], table[ngram].logprob))

    for context in contexts:
        src = states[context]
        for word, logprob in followers[context]:
            if word == BOS or logprob <= LOG_ZERO:
                continue
            if word == EOS:
                fst.set_final(src, _cost(logprob))
                continue
            label = words.find(word)
            if label < 0:
                continue
            fst.add_arc(src, label, label, _cost(logprob), state_for(context + (word,)))
        if context:
            entry = lm.tables[len(context) - 1][context]
            weight = _cost(entry.backoff) if entry.backoff is not None else ONE
            fst.add_arc(src, EPS_ID, EPS_ID, weight, state_for(context[1:]))

    logger.info(f"Built grammar: {fst.num_states} states, {fst.num_arcs} arcs")
    return fst


def make_lexicon(words: Iterable[str], model: Optional[SubwordModel] = None) -> Lexicon:
    """
    Pronunciations for every word: graphemes when ``model`` is None, otherwise
    acoustic BPE units without boundary markers.  Special tokens are skipped.
    """
    lexicon: Lexicon = {}
    for word in sorted(set(words)):
        if is_special(word):
            continue
        if model is None:
            lexicon[word] = tuple(word)
        else:
            lexicon[word] = tuple(encode(model, [word], mark_boundaries=False))
    return lexicon


def lexicon_fst(lexicon: Mapping[str, Sequence[str]], units: Optional[SymbolTable] = None,
                words: Optional[SymbolTable] = None, silence: Optional[str] = None) -> WeightedFst:
    """
    Build L: unit sequences in, words out, closed under concatenation.

    Every pronunciation is a chain leaving and re-entering the start state; the
    word is emitted on the first unit.  With ``silence`` set, any number of
    silence units may sit before, between and after words (epsilon output).

    Raises:
        EmptyPron: when a word has an empty unit sequence
    """
    for word, pron in lexicon.items():
        if not pron:
            raise EmptyPron(f"word {word!r} has an empty pronunciation")
    if units is None:
        units = SymbolTable(sorted({u for pron in lexicon.values() for u in pron}))
    if words is None:
        words = SymbolTable(sorted(lexicon))
    fst = WeightedFst(units, words)
    hub = fst.add_state()
    fst.set_start(hub)
    fst.set_final(hub, ONE)
    if silence is not None:
        fst.add_arc(hub, units.add(silence), EPS_ID, ONE, hub)
    for word in sorted(lexicon):
        pron = lexicon[word]
        out = words.add(word)
        src = hub
        for i, unit in enumerate(pron):
            dest = hub if i == len(pron) - 1 else fst.add_state()
            fst.add_arc(src, units.add(unit), out if i == 0 else EPS_ID, ONE, dest)
            src = dest
    return fst


@dataclass(frozen=True)
class BiphoneTying:
    """
    Tied classes for (left context, unit) pairs.

    Class ids 0..len(units)-1 are the per-unit fallback classes in sorted unit
    order; distinct biphones follow.
    """

    units: Tuple[str, ...]
    biphones: Dict[Tuple[str, str], int] = field(default_factory=dict)

    @cached_property
    def fallback(self) -> Dict[str, int]:
        return {unit: i for i, unit in enumerate(self.units)}

    @property
    def num_classes(self) -> int:
        return len(self.units) + len(self.biphones)

    def class_id(self, left: str, unit: str) -> int:
        found = self.biphones.get((left, unit))
        if found is not None:
            return found
        return self.fallback[unit]

    def class_names(self) -> List[str]:
        names = list(self.units)
        for (left, unit), _ in sorted(self.biphones.items(), key=lambda item: item[1]):
            names.append(f"{left}|{unit}")
        return names

    def classify(self, units: Sequence[str]) -> List[int]:
        """Class sequence for a unit sequence starting a new stream."""
        left = SEQUENCE_START
        result = []
        for unit in units:
            result.append(self.class_id(left, unit))
            left = unit
        return result


def count_biphones(unit_sequences: Iterable[Sequence[str]]) -> Counter:
    """Count (left, unit) pairs; the left context at sequence start is ``<b>``."""
    counts: Counter = Counter()
    for sequence in unit_sequences:
        left = SEQUENCE_START
        for unit in sequence:
            counts[(left, unit)] += 1
            left = unit
    return counts


def cluster_biphones(counts: Mapping[Tuple[str, str], int], threshold: float,
                     units: Iterable[str] = ()) -> BiphoneTying:
    """
    Tie biphones by count: pairs seen at least ``threshold`` times get their own
    class, the rest share the fallback class of their center unit.

    Args:
        counts: (left, unit) counts
        threshold: Minimum count for a distinct class (math.inf gives monophones)
        units: Extra units that need a fallback class
    """
    inventory = set(units)
    for left, unit in counts:
        inventory.add(unit)
        if left != SEQUENCE_START:
            inventory.add(left)
    ordered = tuple(sorted(inventory))
    biphones: Dict[Tuple[str, str], int] = {}
    for pair in sorted(counts):
        if counts[pair] >= threshold:
            biphones[pair] = len(ordered) + len(biphones)
    logger.info(f"Tied {len(counts)} biphones into {len(ordered) + len(biphones)} classes")
    return BiphoneTying(units=ordered, biphones=biphones)


def write_tying(tying: BiphoneTying, path: str) -> None:
    """Lines "fallback unit id" then "biphone left unit id"."""
    log_file_operation("writing tying", path, logger)
    with atomic_write(path) as f:
        for i, unit in enumerate(tying.units):
            f.write(f"fallback {unit} {i}\n")
        for (left, unit), class_id in sorted(tying.biphones.items(), key=lambda item: item[1]):
            f.write(f"biphone {left} {unit} {class_id}\n")


def read_tying(path: str) -> BiphoneTying:
    require_path(path)
    log_file_operation("reading tying", path, logger)
    units: List[str] = []
    biphones: Dict[Tuple[str, str], int] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "fallback" and len(parts) == 3 and int(parts[2]) == len(units):
                units.append(parts[1])
            elif parts[0] == "biphone" and len(parts) == 4:
                biphones[(parts[1], parts[2])] = int(parts[3])
            else:
                raise FstFormat(f"{path} line {line_number}: bad tying entry")
    return BiphoneTying(units=tuple(units), biphones=biphones)


def class_symbols(tying: BiphoneTying) -> SymbolTable:
    """Class k has symbol id k + 1."""
    return SymbolTable(tying.class_names())


def silence_labels(classes: SymbolTable) -> FrozenSet[int]:
    """Frame labels of the silence classes (the fallback class and any silence biphones)."""
    return frozenset(label for label, name in classes
                     if label != EPS_ID and (name == SILENCE or name.endswith(f"|{SILENCE}")))


def context_fst(tying: BiphoneTying, units: Optional[SymbolTable] = None) -> WeightedFst:
    """
    Build C: tied-class sequences in, unit sequences out, one state per left
    context.  All states are final.
    """
    classes = class_symbols(tying)
    if units is None:
        units = SymbolTable(tying.units)
    fst = WeightedFst(classes, units)
    contexts = [SEQUENCE_START] + list(tying.units)
    states = {left: fst.add_state() for left in contexts}
    fst.set_start(states[SEQUENCE_START])
    for left in contexts:
        src = states[left]
        fst.set_final(src, ONE)
        for unit in tying.units:
            label = units.add(unit)
            fst.add_arc(src, tying.class_id(left, unit) + 1, label, ONE, states[unit])
    return fst


def topology_fst(classes: SymbolTable) -> WeightedFst:
    """
    Build H: per class, an entry arc consuming the first frame, a self-loop for
    further frames and an epsilon exit back to the start.

    Frame label ids equal class ids + 1, matching the symbol table.
    """
    fst = WeightedFst(classes, classes)
    hub = fst.add_state()
    fst.set_start(hub)
    fst.set_final(hub, ONE)
    for label, _ in classes:
        if label == EPS_ID:
            continue
        state = fst.add_state()
        fst.add_arc(hub, label, label, ONE, state)
        fst.add_arc(state, label, EPS_ID, ONE, state)
        fst.add_arc(state, EPS_ID, EPS_ID, ONE, hub)
    return fst


def build_decoding_graph(H: WeightedFst, C: WeightedFst, L: WeightedFst, G: WeightedFst,
                         determinize_graph: bool = True,
                         max_multiplier: int = DEFAULT_DETERMINIZE_MULTIPLIER) -> WeightedFst:
    """
    Compose H o (C o (L o G)), then remove epsilons, determinize where the state
    budget allows, and trim.

    Raises:
        EmptyGraph: when nothing survives composition
    """
    LG = compose(L, G)
    CLG = compose(C, LG)
    HCLG = rm_epsilon(compose(H, CLG))
    logger.info(f"Composed graph: LG {LG.num_states}, CLG {CLG.num_states}, HCLG {HCLG.num_states} states")
    if determinize_graph:
        try:
            HCLG = determinize(HCLG, max_multiplier=max_multiplier)
        except DeterminizeBlowup as e:
            logger.warning(f"Skipping determinization: {e}")
    HCLG = connect(HCLG)
    if HCLG.num_states == 0:
        raise EmptyGraph("decoding graph is empty; check that lexicon and LM vocabularies overlap")
    return HCLG


def save_graph(graph: WeightedFst, tying: BiphoneTying, out_dir: str) -> None:
    """Write graph.fst, words.txt, classes.txt and tying.txt into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    write_fst(graph, os.path.join(out_dir, "graph.fst"))
    graph.osyms.write(os.path.join(out_dir, "words.txt"))
    graph.isyms.write(os.path.join(out_dir, "classes.txt"))
    write_tying(tying, os.path.join(out_dir, "tying.txt"))


def load_graph(graph_dir: str) -> Tuple[WeightedFst, BiphoneTying]:
    """Read a directory written by save_graph."""
    require_path(graph_dir)
    classes = SymbolTable.read(os.path.join(graph_dir, "classes.txt"))
    words = SymbolTable.read(os.path.join(graph_dir, "words.txt"))
    graph = read_fst(os.path.join(graph_dir, "graph.fst"), isyms=classes, osyms=words)
    tying = read_tying(os.path.join(graph_dir, "tying.txt"))
    if len(classes) - 1 != tying.num_classes:
        raise FstFormat(f"{graph_dir}: classes.txt has {len(classes) - 1} classes, tying has {tying.num_classes}")
    return graph, tying
