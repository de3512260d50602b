"""
Posteriorgram files: per-utterance frames x classes matrices of acoustic log-scores.

Text form: a header line "utt-id n_frames n_classes frame_rate" followed by one row
per frame.  Binary form (``.bin``/``.pgb`` files): the same header line followed by
little-endian float32 values.  Both forms may hold several utterances back to back.
"""

import logging
import os
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from pkg.utils.errors import MatrixShape
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

DEFAULT_FRAME_RATE = 50.0
BINARY_SUFFIXES = (".bin", ".pgb")
_TEXT_FORMAT = "%.9g"


@dataclass
class Posteriorgram:
    """Acoustic log-scores for one utterance, stored as float32."""

    utt_id: str
    matrix: np.ndarray
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise MatrixShape(f"{self.utt_id}: expected a non-empty frames x classes matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise MatrixShape(f"{self.utt_id}: matrix holds non-finite scores")
        if not self.frame_rate > 0:
            raise MatrixShape(f"{self.utt_id}: frame rate must be positive")
        if not self.utt_id or any(ch.isspace() for ch in self.utt_id):
            raise MatrixShape(f"bad utterance id {self.utt_id!r}")
        self.matrix = matrix
        self.frame_rate = float(self.frame_rate)

    @property
    def num_frames(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[1]

    @property
    def duration(self) -> float:
        return self.num_frames / self.frame_rate

    def __eq__(self, other) -> bool:
        if not isinstance(other, Posteriorgram):
            return NotImplemented
        return (self.utt_id == other.utt_id and self.frame_rate == other.frame_rate
                and self.matrix.shape == other.matrix.shape
                and self.matrix.tobytes() == other.matrix.tobytes())


def frames_for_duration(seconds: float, frame_rate: float = DEFAULT_FRAME_RATE) -> int:
    """Number of frames covering ``seconds`` of audio."""
    return int(round(seconds * frame_rate))


def is_binary_path(path: str) -> bool:
    return os.path.splitext(path)[1].lower() in BINARY_SUFFIXES


def _header(pg: Posteriorgram) -> str:
    return f"{pg.utt_id} {pg.num_frames} {pg.num_classes} {pg.frame_rate!r}\n"


def _parse_header(line: str, where: str):
    parts = line.split()
    if len(parts) != 4:
        raise MatrixShape(f"{where}: expected 'utt-id n_frames n_classes frame_rate'")
    try:
        n_frames, n_classes, frame_rate = int(parts[1]), int(parts[2]), float(parts[3])
    except ValueError:
        raise MatrixShape(f"{where}: bad header values")
    if n_frames < 1 or n_classes < 1:
        raise MatrixShape(f"{where}: empty matrix")
    return parts[0], n_frames, n_classes, frame_rate


def write_posteriorgrams(pgs: Sequence[Posteriorgram], path: str) -> None:
    """Write utterances in the form chosen by the file suffix."""
    log_file_operation("writing posteriorgrams", path, logger)
    if is_binary_path(path):
        with atomic_write(path, "wb") as f:
            for pg in pgs:
                f.write(_header(pg).encode("utf-8"))
                f.write(pg.matrix.astype("<f4").tobytes())
    else:
        with atomic_write(path) as f:
            for pg in pgs:
                f.write(_header(pg))
                np.savetxt(f, pg.matrix, fmt=_TEXT_FORMAT)


def write_posteriorgram(pg: Posteriorgram, path: str) -> None:
    write_posteriorgrams([pg], path)


def _read_binary(path: str) -> List[Posteriorgram]:
    with open(path, "rb") as f:
        data = f.read()
    pgs = []
    pos = 0
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0:
            raise MatrixShape(f"{path}: truncated header at byte {pos}")
        utt_id, n_frames, n_classes, frame_rate = _parse_header(data[pos:end].decode("utf-8"), f"{path} byte {pos}")
        size = n_frames * n_classes * 4
        body = data[end + 1:end + 1 + size]
        if len(body) != size:
            raise MatrixShape(f"{path}: {utt_id} holds fewer values than its header declares")
        matrix = np.frombuffer(body, dtype="<f4").reshape(n_frames, n_classes).astype(np.float32)
        pgs.append(Posteriorgram(utt_id, matrix, frame_rate))
        pos = end + 1 + size
    return pgs


def _read_text(path: str) -> List[Posteriorgram]:
    with open(path, "r", encoding="utf-8") as f:
        lines = [(n, line) for n, line in enumerate(f, 1) if line.strip()]
    pgs = []
    pos = 0
    while pos < len(lines):
        line_number, line = lines[pos]
        utt_id, n_frames, n_classes, frame_rate = _parse_header(line, f"{path} line {line_number}")
        rows = lines[pos + 1:pos + 1 + n_frames]
        if len(rows) != n_frames:
            raise MatrixShape(f"{path}: {utt_id} has {len(rows)} rows, header says {n_frames}")
        matrix = np.empty((n_frames, n_classes), dtype=np.float32)
        for i, (row_number, row) in enumerate(rows):
            values = row.split()
            if len(values) != n_classes:
                raise MatrixShape(f"{path} line {row_number}: {len(values)} columns, header says {n_classes}")
            try:
                matrix[i] = np.array(values, dtype=np.float64)
            except ValueError:
                raise MatrixShape(f"{path} line {row_number}: non-numeric score")
        pgs.append(Posteriorgram(utt_id, matrix, frame_rate))
        pos += 1 + n_frames
    return pgs


def read_posteriorgrams(path: str) -> List[Posteriorgram]:
    """Read every utterance in a posteriorgram file."""
    require_path(path)
    log_file_operation("reading posteriorgrams", path, logger)
    pgs = _read_binary(path) if is_binary_path(path) else _read_text(path)
    logger.info(f"Read {len(pgs)} posteriorgrams")
    return pgs


def read_posteriorgram(path: str) -> Posteriorgram:
    """Read a file holding exactly one utterance."""
    pgs = read_posteriorgrams(path)
    if len(pgs) != 1:
        raise MatrixShape(f"{path}: expected one utterance, found {len(pgs)}")
    return pgs[0]
