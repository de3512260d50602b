"""
ARPA backoff-model interchange.
"""

import logging
import re
from typing import Dict, List

from pkg.ngram.core import EOS, BackoffNGramLM, NGram, NGramEntry
from pkg.utils.errors import ArpaParse
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

_COUNT_LINE = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
_SECTION_LINE = re.compile(r"^\\(\d+)-grams:$")


def export_arpa(lm: BackoffNGramLM, path: str) -> None:
    """
    Write a model in ARPA layout.

    Weights are written with full float precision so import reproduces them exactly.
    """
    log_file_operation("writing ARPA model", path, logger)
    with atomic_write(path) as f:
        f.write("\\data\\\n")
        for n, table in enumerate(lm.tables, 1):
            f.write(f"ngram {n}={len(table)}\n")
        f.write("\n")
        for n, table in enumerate(lm.tables, 1):
            f.write(f"\\{n}-grams:\n")
            for ngram in sorted(table):
                entry = table[ngram]
                line = f"{entry.logprob!r}\t{' '.join(ngram)}"
                if entry.backoff is not None:
                    line += f"\t{entry.backoff!r}"
                f.write(line + "\n")
            f.write("\n")
        f.write("\\end\\\n")


def _parse_float(text: str, line_number: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ArpaParse(f"bad number {text!r}", line_number)


def _fill_missing_backoffs(tables: List[Dict[NGram, NGramEntry]]) -> None:
    """An omitted backoff field means log10 backoff 0 for any context of a longer n-gram."""
    for n in range(1, len(tables)):
        shorter = tables[n - 1]
        for ngram in tables[n]:
            prefix = ngram[:-1]
            entry = shorter.get(prefix)
            if entry is not None and entry.backoff is None and prefix[-1] != EOS:
                shorter[prefix] = entry._replace(backoff=0.0)


def import_arpa(path: str) -> BackoffNGramLM:
    """
    Read an ARPA file (pruned files are accepted).

    Args:
        path: ARPA file path

    Returns:
        BackoffNGramLM with the file's probabilities and backoff weights

    Raises:
        ArpaParse: on malformed headers or sections, with the offending line number
    """
    require_path(path)
    log_file_operation("reading ARPA model", path, logger)
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f]

    pos = 0
    while pos < len(lines) and not lines[pos]:
        pos += 1
    if pos >= len(lines) or lines[pos] != "\\data\\":
        raise ArpaParse("expected \\data\\ header", pos + 1)
    pos += 1

    declared: Dict[int, int] = {}
    while pos < len(lines) and lines[pos]:
        match = _COUNT_LINE.match(lines[pos])
        if not match:
            raise ArpaParse(f"bad count line {lines[pos]!r}", pos + 1)
        order = int(match.group(1))
        if order != len(declared) + 1:
            raise ArpaParse(f"count for order {order} out of sequence", pos + 1)
        declared[order] = int(match.group(2))
        pos += 1
    if not declared:
        raise ArpaParse("no n-gram counts declared", pos + 1)

    tables: List[Dict[NGram, NGramEntry]] = []
    finished = False
    current = 0
    header_line = 0
    while pos < len(lines):
        line = lines[pos]
        line_number = pos + 1
        pos += 1
        if not line:
            continue
        if line == "\\end\\":
            finished = True
            break
        match = _SECTION_LINE.match(line)
        if match:
            if current and len(tables[-1]) != declared[current]:
                raise ArpaParse(f"{current}-gram section has {len(tables[-1])} entries, "
                                f"declared {declared[current]}", header_line)
            current = int(match.group(1))
            if current != len(tables) + 1 or current not in declared:
                raise ArpaParse(f"unexpected section {line!r}", line_number)
            tables.append({})
            header_line = line_number
            continue
        if not current:
            raise ArpaParse(f"entry outside any n-gram section: {line!r}", line_number)
        fields = line.split()
        if len(fields) == current + 1:
            backoff = None
        elif len(fields) == current + 2:
            backoff = _parse_float(fields[-1], line_number)
        else:
            raise ArpaParse(f"expected {current} words in {line!r}", line_number)
        logprob = _parse_float(fields[0], line_number)
        ngram = tuple(fields[1:current + 1])
        tables[-1][ngram] = NGramEntry(logprob, backoff)

    if not finished:
        raise ArpaParse("missing \\end\\ marker", len(lines))
    if current and len(tables[-1]) != declared[current]:
        raise ArpaParse(f"{current}-gram section has {len(tables[-1])} entries, "
                        f"declared {declared[current]}", header_line)
    if len(tables) != len(declared):
        raise ArpaParse(f"declared {len(declared)} orders, found {len(tables)} sections", len(lines))
    _fill_missing_backoffs(tables)

    vocab = frozenset(word for (word,) in tables[0])
    logger.info(f"Imported {len(tables)}-gram model: counts {[len(t) for t in tables]}")
    return BackoffNGramLM(order=len(tables), tables=tuple(tables), vocab=vocab)
