"""
Chunked decoding of long recordings and segment derivation from first-pass output.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Sequence, Tuple, Union

from pkg.decoder.core import DecodeConfig, GraphIndex, WordAlignment, decode
from pkg.decoder.posteriorgram import Posteriorgram
from pkg.fst.core import WeightedFst
from pkg.utils.errors import BadConfig, DecodeDeadEnd, ManifestFormat
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation, log_error_with_context

logger = setup_secure_logging(__name__, logging.WARNING)

SEGMENT_COLUMNS = ("segment_id", "source_id", "start", "end", "words", "times")

DEFAULT_CHUNK_SECONDS = 30.0
DEFAULT_MIN_DURATION = 5.0
DEFAULT_MAX_DURATION = 30.0
DEFAULT_SILENCE_GAP = 0.5
DEFAULT_MAX_MERGE_GAP = 1.0
FILLER_WORDS = ("<sil>",)


def format_segment_id(source_id: str, start: float, end: float) -> str:
    """"srcid-SSSSSSS-EEEEEEE" with centisecond fields."""
    return f"{source_id}-{int(round(start * 100)):07d}-{int(round(end * 100)):07d}"


def chunk_stream(total_duration: float, chunk: float = DEFAULT_CHUNK_SECONDS) -> List[Tuple[float, float]]:
    """
    Consecutive ``[k*chunk, (k+1)*chunk)`` windows tiling ``[0, total_duration)``.

    The final window is cut at ``total_duration``.
    """
    if not total_duration > 0:
        raise BadConfig(f"total duration must be positive, got {total_duration}")
    if not chunk > 0:
        raise BadConfig(f"chunk length must be positive, got {chunk}")
    count = max(1, math.ceil(total_duration / chunk))
    windows = []
    for k in range(count):
        start = k * chunk
        if start >= total_duration:
            break
        windows.append((start, min((k + 1) * chunk, total_duration)))
    return windows


class DecodedChunk(NamedTuple):
    """First-pass words of one chunk; word frames are relative to ``offset``."""

    source_id: str
    offset: float
    words: Sequence[WordAlignment]


def split_posteriorgram(pg: Posteriorgram, chunk: float = DEFAULT_CHUNK_SECONDS) -> List[Tuple[float, Posteriorgram]]:
    """
    Cut a long posteriorgram into chunk_stream windows.

    Returns:
        (offset seconds, chunk posteriorgram) pairs; chunk ids follow format_segment_id
    """
    pieces = []
    for start, end in chunk_stream(pg.duration, chunk):
        first = int(round(start * pg.frame_rate))
        last = min(pg.num_frames, int(round(end * pg.frame_rate)))
        if last <= first:
            continue
        chunk_id = format_segment_id(pg.utt_id, start, end)
        pieces.append((start, Posteriorgram(chunk_id, pg.matrix[first:last], pg.frame_rate)))
    return pieces


@dataclass(frozen=True)
class Segment:
    """A time span of one source recording with its first-pass transcript."""

    source_id: str
    start: float
    end: float
    words: Tuple[str, ...]
    times: Tuple[Tuple[float, float], ...]

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def segment_id(self) -> str:
        return format_segment_id(self.source_id, self.start, self.end)


class _TimedWord(NamedTuple):
    word: str
    start: float
    end: float


def _candidates(chunk: DecodedChunk, frame_rate: float, silence_gap: float,
                fillers: Iterable[str]) -> List[List[_TimedWord]]:
    fillers = set(fillers)
    timed = sorted((_TimedWord(w.word, chunk.offset + w.start_frame / frame_rate,
                               chunk.offset + w.end_frame / frame_rate) for w in chunk.words),
                   key=lambda w: (w.start, w.end))
    groups: List[List[_TimedWord]] = []
    current: List[_TimedWord] = []
    for word in timed:
        if word.word in fillers:
            continue
        if current and word.start - current[-1].end >= silence_gap:
            groups.append(current)
            current = []
        current.append(word)
    if current:
        groups.append(current)
    return groups


def _to_segment(source_id: str, words: List[_TimedWord]) -> Segment:
    return Segment(source_id=source_id, start=words[0].start, end=words[-1].end,
                   words=tuple(w.word for w in words), times=tuple((w.start, w.end) for w in words))


def derive_segments(chunks: Sequence[DecodedChunk], frame_rate: float,
                    min_dur: float = DEFAULT_MIN_DURATION, max_dur: float = DEFAULT_MAX_DURATION,
                    silence_gap: float = DEFAULT_SILENCE_GAP, max_merge_gap: float = DEFAULT_MAX_MERGE_GAP,
                    fillers: Iterable[str] = FILLER_WORDS) -> List[Segment]:
    """
    Turn time-ordered first-pass chunks into training segments.

    Candidates end at word boundaries and are split at pauses of at least
    ``silence_gap`` seconds and at chunk boundaries.  Adjacent candidates of the
    same source are merged greedily while the pause between them is at most
    ``max_merge_gap`` and the merged span stays within ``max_dur``.  Only
    segments with ``min_dur <= duration <= max_dur`` are returned.
    """
    if not 0 < min_dur <= max_dur:
        raise BadConfig(f"need 0 < min_dur <= max_dur, got {min_dur} and {max_dur}")
    fillers = tuple(fillers)
    candidates: List[Segment] = []
    for chunk in chunks:
        for group in _candidates(chunk, frame_rate, silence_gap, fillers):
            candidates.append(_to_segment(chunk.source_id, group))

    merged: List[Segment] = []
    for candidate in candidates:
        if merged:
            last = merged[-1]
            if (last.source_id == candidate.source_id
                    and 0 <= candidate.start - last.end <= max_merge_gap
                    and candidate.end - last.start <= max_dur):
                merged[-1] = Segment(source_id=last.source_id, start=last.start, end=candidate.end,
                                     words=last.words + candidate.words, times=last.times + candidate.times)
                continue
        merged.append(candidate)

    kept = [s for s in merged if min_dur <= s.duration <= max_dur]
    logger.info(f"Derived {len(kept)} segments from {len(candidates)} candidates")
    return kept


def decode_chunks(graph: Union[WeightedFst, GraphIndex], recordings: Sequence[Posteriorgram],
                  cfg: DecodeConfig = DecodeConfig(), chunk: float = DEFAULT_CHUNK_SECONDS,
                  workers: int = 1) -> List[DecodedChunk]:
    """
    First-pass decode of long recordings in fixed-length chunks.

    A chunk that dead-ends is logged and skipped; it simply contributes no words.
    """
    index = graph if isinstance(graph, GraphIndex) else GraphIndex(graph)
    pieces = []
    for pg in recordings:
        for offset, piece in split_posteriorgram(pg, chunk):
            pieces.append((pg.utt_id, offset, piece))

    def run(item):
        source_id, offset, piece = item
        try:
            result = decode(index, piece, cfg)
        except DecodeDeadEnd as e:
            log_error_with_context(e, f"decoding chunk {piece.utt_id}", logger)
            return None
        return DecodedChunk(source_id, offset, result.words)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            decoded = list(pool.map(run, pieces))
    else:
        decoded = [run(item) for item in pieces]
    return [chunk for chunk in decoded if chunk is not None]


def write_segments(segments: Sequence[Segment], path: str) -> None:
    """TSV with header; times are "start,end" pairs separated by spaces."""
    log_file_operation("writing segments", path, logger)
    with atomic_write(path) as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(SEGMENT_COLUMNS)
        for s in segments:
            times = " ".join(f"{a!r},{b!r}" for a, b in s.times)
            writer.writerow([s.segment_id, s.source_id, repr(s.start), repr(s.end), " ".join(s.words), times])


def read_segments(path: str) -> List[Segment]:
    require_path(path)
    log_file_operation("reading segments", path, logger)
    segments = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != SEGMENT_COLUMNS:
            raise ManifestFormat(f"{path}: expected header {' '.join(SEGMENT_COLUMNS)}")
        for line_number, fields in enumerate(reader, 2):
            if not fields:
                continue
            if len(fields) != len(SEGMENT_COLUMNS):
                raise ManifestFormat(f"{path} line {line_number}: expected {len(SEGMENT_COLUMNS)} columns")
            try:
                times = tuple(tuple(float(x) for x in pair.split(",")) for pair in fields[5].split())
                segment = Segment(source_id=fields[1], start=float(fields[2]), end=float(fields[3]),
                                  words=tuple(fields[4].split()), times=times)
            except ValueError as e:
                raise ManifestFormat(f"{path} line {line_number}: {e}")
            if segment.segment_id != fields[0]:
                raise ManifestFormat(f"{path} line {line_number}: id {fields[0]} does not match its times")
            segments.append(segment)
    return segments
