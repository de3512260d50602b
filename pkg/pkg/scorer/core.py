"""
Word error rate scoring with Levenshtein alignment and apostrophe leniency.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from pkg.textnorm.core import DEFAULT_RULES, NormalizationRules, strip_edge_apostrophes
from pkg.utils.errors import DuplicateUtterance, EmptyReference, MissingReference
from pkg.utils.io import atomic_write, read_table
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

OK, SUB, DEL, INS = "ok", "sub", "del", "ins"


class AlignedPair(NamedTuple):
    """``ref`` is None for insertions, ``hyp`` is None for deletions."""

    ref: Optional[str]
    hyp: Optional[str]
    tag: str


def edit_table(ref: Sequence[str], hyp: Sequence[str]) -> np.ndarray:
    """Levenshtein DP table with unit costs."""
    table = np.zeros((len(ref) + 1, len(hyp) + 1), dtype=np.int64)
    table[:, 0] = np.arange(len(ref) + 1)
    table[0, :] = np.arange(len(hyp) + 1)
    for i in range(1, len(ref) + 1):
        for j in range(1, len(hyp) + 1):
            diagonal = table[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            table[i, j] = min(diagonal, table[i - 1, j] + 1, table[i, j - 1] + 1)
    return table


def align(ref: Sequence[str], hyp: Sequence[str]) -> List[AlignedPair]:
    """
    Minimum-edit alignment; on ties the backtrace prefers a match or
    substitution, then a deletion, then an insertion.
    """
    table = edit_table(ref, hyp)
    pairs: List[AlignedPair] = []
    i, j = len(ref), len(hyp)
    while i > 0 or j > 0:
        if i > 0 and j > 0 and table[i, j] == table[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            tag = OK if ref[i - 1] == hyp[j - 1] else SUB
            pairs.append(AlignedPair(ref[i - 1], hyp[j - 1], tag))
            i, j = i - 1, j - 1
        elif i > 0 and table[i, j] == table[i - 1, j] + 1:
            pairs.append(AlignedPair(ref[i - 1], None, DEL))
            i -= 1
        else:
            pairs.append(AlignedPair(None, hyp[j - 1], INS))
            j -= 1
    pairs.reverse()
    return pairs


@dataclass
class UtteranceScore:
    utt_id: str
    alignment: List[AlignedPair]

    def count(self, tag: str) -> int:
        return sum(1 for pair in self.alignment if pair.tag == tag)

    @property
    def substitutions(self) -> int:
        return self.count(SUB)

    @property
    def deletions(self) -> int:
        return self.count(DEL)

    @property
    def insertions(self) -> int:
        return self.count(INS)

    @property
    def ref_length(self) -> int:
        return sum(1 for pair in self.alignment if pair.ref is not None)

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


@dataclass
class EvalReport:
    utterances: List[UtteranceScore] = field(default_factory=list)

    @property
    def substitutions(self) -> int:
        return sum(u.substitutions for u in self.utterances)

    @property
    def deletions(self) -> int:
        return sum(u.deletions for u in self.utterances)

    @property
    def insertions(self) -> int:
        return sum(u.insertions for u in self.utterances)

    @property
    def ref_length(self) -> int:
        return sum(u.ref_length for u in self.utterances)

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / self.ref_length


def _forgive_apostrophes(alignment: List[AlignedPair], rules: NormalizationRules) -> List[AlignedPair]:
    result = []
    for pair in alignment:
        if pair.tag == SUB and strip_edge_apostrophes(pair.ref, rules) == strip_edge_apostrophes(pair.hyp, rules):
            pair = pair._replace(tag=OK)
        result.append(pair)
    return result


def score_utterance(utt_id: str, ref: Sequence[str], hyp: Sequence[str], lenient_apostrophe: bool = False,
                    rules: NormalizationRules = DEFAULT_RULES) -> UtteranceScore:
    ref = [w.lower() for w in ref]
    hyp = [w.lower() for w in hyp]
    alignment = align(ref, hyp)
    if lenient_apostrophe:
        alignment = _forgive_apostrophes(alignment, rules)
    return UtteranceScore(utt_id, alignment)


def compute_wer(refs: Mapping[str, Sequence[str]], hyps: Mapping[str, Sequence[str]],
                lenient_apostrophe: bool = False, rules: NormalizationRules = DEFAULT_RULES,
                workers: int = 1) -> EvalReport:
    """
    Score hypotheses against references, utterance by utterance in reference order.

    With ``lenient_apostrophe`` a substitution whose two words agree after
    stripping edge apostrophes counts as correct; the alignment is computed first.

    Raises:
        MissingReference: when a hypothesis id has no reference
        EmptyReference: when the references hold no words
    """
    missing = [utt_id for utt_id in hyps if utt_id not in refs]
    if missing:
        raise MissingReference(f"no reference for {len(missing)} hypotheses, first {missing[0]!r}")
    unmatched = [utt_id for utt_id in refs if utt_id not in hyps]
    if unmatched:
        logger.warning(f"{len(unmatched)} references have no hypothesis; scoring them as deletions")

    ids = list(refs)

    def score(utt_id: str) -> UtteranceScore:
        return score_utterance(utt_id, refs[utt_id], hyps.get(utt_id, ()), lenient_apostrophe, rules)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(score, ids))
    else:
        scores = [score(utt_id) for utt_id in ids]
    report = EvalReport(scores)
    if report.ref_length == 0:
        raise EmptyReference("references contain no words")
    return report


def format_report(report: EvalReport) -> str:
    return (f"WER {100.0 * report.wer:.2f}% [ {report.errors} / {report.ref_length}, "
            f"{report.insertions} ins, {report.deletions} del, {report.substitutions} sub ]")


def write_report_tsv(report: EvalReport, path: str) -> None:
    """Per-utterance "utt_id S D I N" rows with a header."""
    log_file_operation("writing score report", path, logger)
    with atomic_write(path) as f:
        f.write("utt_id\tS\tD\tI\tN\n")
        for u in report.utterances:
            f.write(f"{u.utt_id}\t{u.substitutions}\t{u.deletions}\t{u.insertions}\t{u.ref_length}\n")


def read_transcripts(path: str) -> Dict[str, List[str]]:
    """
    Read "utt-id<TAB>words" lines into an ordered mapping.

    Raises:
        DuplicateUtterance: when an utterance id appears twice
    """
    log_file_operation("reading transcripts", path, logger)
    transcripts: Dict[str, List[str]] = {}
    for utt_id, text in read_table(path):
        if utt_id in transcripts:
            raise DuplicateUtterance(f"{path}: utterance id {utt_id!r} appears more than once")
        transcripts[utt_id] = text.split()
    return transcripts


def format_alignment(score: UtteranceScore) -> str:
    """Three aligned rows (REF, HYP, tags) for human inspection."""
    refs, hyps, tags = ["REF:"], ["HYP:"], ["OPS:"]
    for pair in score.alignment:
        ref = pair.ref if pair.ref is not None else "*"
        hyp = pair.hyp if pair.hyp is not None else "*"
        width = max(len(ref), len(hyp), len(pair.tag))
        refs.append(ref.ljust(width))
        hyps.append(hyp.ljust(width))
        tags.append(pair.tag.ljust(width))
    return "\n".join(" ".join(row).rstrip() for row in (refs, hyps, tags))
