"""
Byte-pair-encoding subword units for LM tokens and acoustic units.
"""

import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from pkg.textnorm.core import NormalizedUtterance
from pkg.utils.errors import EmptyCorpus, EmptyToken, ModelFormat, UnknownUnit, VocabTooSmall
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

FORMAT_VERSION = "v1"
BOUNDARY_MARKER = "▁"
UNK = "<unk>"

_SPECIAL = re.compile(r"^<[^<>\s]+>$")

Corpus = Iterable[Union[NormalizedUtterance, Sequence[str]]]


def is_special(token: str) -> bool:
    """True for bracketed symbols such as ``<spn>`` that are never split."""
    return bool(_SPECIAL.match(token))


@dataclass(frozen=True)
class SubwordModel:
    """Ordered BPE merges plus the unit inventory they produce."""

    merges: Tuple[Tuple[str, str], ...]
    inventory: FrozenSet[str]
    vocab_size: int
    boundary_marker: str = BOUNDARY_MARKER
    reserved: Tuple[str, ...] = (UNK,)

    @cached_property
    def ranks(self) -> Dict[Tuple[str, str], int]:
        return {pair: rank for rank, pair in enumerate(self.merges)}

    @cached_property
    def units(self) -> FrozenSet[str]:
        """Inventory plus reserved symbols."""
        return self.inventory | frozenset(self.reserved)

    def _split_word(self, word: str) -> Tuple[str, ...]:
        if is_special(word):
            return (word if word in self.reserved else UNK,)
        pieces = [ch if ch in self.inventory else UNK for ch in word]
        ranks = self.ranks
        while len(pieces) > 1:
            best_rank, best_pair = None, None
            for pair in zip(pieces, pieces[1:]):
                rank = ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_pair = rank, pair
            if best_pair is None:
                break
            merged, i = [], 0
            while i < len(pieces):
                if i < len(pieces) - 1 and (pieces[i], pieces[i + 1]) == best_pair:
                    merged.append(pieces[i] + pieces[i + 1])
                    i += 2
                else:
                    merged.append(pieces[i])
                    i += 1
            pieces = merged
        return tuple(pieces)


def _corpus_words(corpus: Corpus) -> Counter:
    counts: Counter = Counter()
    for item in corpus:
        tokens = item.tokens if isinstance(item, NormalizedUtterance) else item
        counts.update(tokens)
    return counts


def _pairs(symbols: Sequence[str]) -> Counter:
    return Counter(zip(symbols, symbols[1:]))


def _best_pair(pair_counts: Counter) -> Optional[Tuple[Tuple[str, str], int]]:
    best, best_key = None, None
    for pair, count in pair_counts.items():
        if count <= 0:
            continue
        # highest count, then lexicographically smallest concatenation
        key = (-count, pair[0] + pair[1], pair)
        if best_key is None or key < best_key:
            best, best_key = pair, key
    if best is None:
        return None
    return best, -best_key[0]


def train_bpe(corpus: Corpus, vocab_size: int,
              boundary_marker: str = BOUNDARY_MARKER) -> SubwordModel:
    """
    Learn BPE merges by greedy highest-frequency pair merging.

    Args:
        corpus: Normalized utterances (or plain word sequences)
        vocab_size: Target inventory size, base characters included
        boundary_marker: Symbol prefixed to word-initial units

    Returns:
        Trained SubwordModel
    """
    word_counts = _corpus_words(corpus)
    if not word_counts:
        raise EmptyCorpus("cannot train BPE on an empty corpus")

    specials = sorted(w for w in word_counts if is_special(w) and w != UNK)
    words = sorted(w for w in word_counts if not is_special(w))
    base = sorted({ch for w in words for ch in w})
    if vocab_size < len(base):
        raise VocabTooSmall(f"vocab_size {vocab_size} is below the {len(base)} base characters")

    symbols: List[List[str]] = [list(w) for w in words]
    freqs = [word_counts[w] for w in words]
    pair_counts: Counter = Counter()
    where: Dict[Tuple[str, str], Set[int]] = defaultdict(set)
    for idx, syms in enumerate(symbols):
        for pair, n in _pairs(syms).items():
            pair_counts[pair] += n * freqs[idx]
            where[pair].add(idx)

    inventory: Set[str] = set(base)
    merges: List[Tuple[str, str]] = []
    while len(inventory) < vocab_size:
        found = _best_pair(pair_counts)
        if found is None or found[1] < 2:
            break
        pair, count = found
        merges.append(pair)
        inventory.add(pair[0] + pair[1])
        for idx in sorted(where.pop(pair, ())):
            old = symbols[idx]
            for p, n in _pairs(old).items():
                pair_counts[p] -= n * freqs[idx]
            new, i = [], 0
            while i < len(old):
                if i < len(old) - 1 and (old[i], old[i + 1]) == pair:
                    new.append(old[i] + old[i + 1])
                    i += 2
                else:
                    new.append(old[i])
                    i += 1
            symbols[idx] = new
            for p, n in _pairs(new).items():
                pair_counts[p] += n * freqs[idx]
                where[p].add(idx)
        pair_counts.pop(pair, None)
        logger.debug(f"merge {len(merges)}: {pair} count={count}")

    logger.info(f"Trained BPE: {len(base)} base units, {len(merges)} merges")
    return SubwordModel(
        merges=tuple(merges),
        inventory=frozenset(inventory),
        vocab_size=vocab_size,
        boundary_marker=boundary_marker,
        reserved=(UNK,) + tuple(specials),
    )


def encode(model: SubwordModel, text: Sequence[str], mark_boundaries: bool = True) -> List[str]:
    """
    Split words into units.

    Args:
        model: Trained model
        text: Word sequence
        mark_boundaries: Prefix each word-initial unit with the boundary marker

    Returns:
        Unit sequence

    Raises:
        EmptyToken: for an empty word
    """
    units: List[str] = []
    for word in text:
        if not word:
            raise EmptyToken("cannot encode an empty word")
        pieces = model._split_word(word)
        if mark_boundaries:
            units.append(model.boundary_marker + pieces[0])
            units.extend(pieces[1:])
        else:
            units.extend(pieces)
    return units


def decode(model: SubwordModel, units: Sequence[str]) -> List[str]:
    """
    Join units back into words, starting a new word at every boundary marker.

    Raises:
        UnknownUnit: for a unit outside the inventory and reserved symbols
    """
    words: List[str] = []
    marker = model.boundary_marker
    for unit in units:
        starts_word = unit.startswith(marker)
        body = unit[len(marker):] if starts_word else unit
        if body not in model.units:
            raise UnknownUnit(f"unit {unit!r} is not in the inventory")
        if starts_word or not words:
            words.append(body)
        else:
            words[-1] += body
    return words


def save_model(model: SubwordModel, path: str) -> None:
    """Write the model: header, merges, reserved symbols, then inventory."""
    log_file_operation("writing BPE model", path, logger)
    with atomic_write(path) as f:
        f.write(f"#subword-bpe {FORMAT_VERSION} vocab_size={model.vocab_size} "
                f"boundary={model.boundary_marker}\n")
        f.write(f"merges {len(model.merges)}\n")
        for left, right in model.merges:
            f.write(f"{left}\t{right}\n")
        f.write(f"reserved {len(model.reserved)}\n")
        for symbol in model.reserved:
            f.write(f"{symbol}\n")
        f.write(f"inventory {len(model.inventory)}\n")
        for unit in sorted(model.inventory):
            f.write(f"{unit}\n")


def _read_section(lines: List[str], pos: int, name: str) -> Tuple[int, int]:
    if pos >= len(lines):
        raise ModelFormat(f"missing '{name}' section")
    parts = lines[pos].split(" ")
    if len(parts) != 2 or parts[0] != name or not parts[1].isdigit():
        raise ModelFormat(f"line {pos + 1}: expected '{name} <count>'")
    count = int(parts[1])
    if pos + 1 + count > len(lines):
        raise ModelFormat(f"'{name}' section is truncated")
    return pos + 1, count


def load_model(path: str) -> SubwordModel:
    """Read a model written by save_model."""
    require_path(path)
    log_file_operation("reading BPE model", path, logger)
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ModelFormat("empty model file")
    header = lines[0].split(" ")
    if len(header) != 4 or header[0] != "#subword-bpe" or header[1] != FORMAT_VERSION:
        raise ModelFormat("line 1: bad header")
    try:
        fields = dict(item.split("=", 1) for item in header[2:])
        vocab_size = int(fields["vocab_size"])
        marker = fields["boundary"]
    except (KeyError, ValueError):
        raise ModelFormat("line 1: bad header fields")

    pos, count = _read_section(lines, 1, "merges")
    merges = []
    for line in lines[pos:pos + count]:
        parts = line.split("\t")
        if len(parts) != 2:
            raise ModelFormat(f"bad merge line {line!r}")
        merges.append((parts[0], parts[1]))
    pos, count = _read_section(lines, pos + count, "reserved")
    reserved = tuple(lines[pos:pos + count])
    pos, count = _read_section(lines, pos + count, "inventory")
    inventory = frozenset(lines[pos:pos + count])
    if pos + count != len(lines):
        raise ModelFormat("trailing lines after inventory")

    return SubwordModel(merges=tuple(merges), inventory=inventory, vocab_size=vocab_size,
                        boundary_marker=marker, reserved=reserved)
