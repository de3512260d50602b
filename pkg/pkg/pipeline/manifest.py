"""
Training-data manifests: one row per segment with its transcript and provenance.
"""

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, List, Mapping, Optional, Sequence

from pkg.pipeline.segments import Segment
from pkg.utils.errors import DuplicateSegment, ManifestFormat
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

COLUMNS = ("segment_id", "path", "start", "end", "transcript", "provenance")


class Provenance(str, Enum):
    MANUAL = "manual"
    PSEUDO = "pseudo"
    AUGMENTED = "augmented"


@dataclass(frozen=True)
class ManifestRow:
    segment_id: str
    path: str
    start: float
    end: float
    transcript: str
    provenance: Provenance


@dataclass
class Manifest:
    """Rows with unique segment ids, kept in insertion order."""

    rows: List[ManifestRow] = field(default_factory=list)

    def __post_init__(self):
        rows, self.rows = self.rows, []
        self._ids = set()
        for row in rows:
            self.add(row)

    def add(self, row: ManifestRow) -> None:
        if row.segment_id in self._ids:
            raise DuplicateSegment(f"segment id {row.segment_id!r} already in manifest")
        self._ids.add(row.segment_id)
        self.rows.append(row)

    def extend(self, rows: Iterable[ManifestRow]) -> None:
        for row in rows:
            self.add(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[ManifestRow]:
        return iter(self.rows)

    def __contains__(self, segment_id: str) -> bool:
        return segment_id in self._ids


def make_pseudo_manifest(segments: Sequence[Segment], transcripts: Optional[Mapping[str, str]] = None,
                         audio_paths: Optional[Mapping[str, str]] = None) -> Manifest:
    """
    One row per segment with provenance ``pseudo``.

    Args:
        segments: Derived segments
        transcripts: Manually corrected transcripts by segment id; these rows get provenance ``manual``
        audio_paths: Audio or posteriorgram path by source id

    Raises:
        DuplicateSegment: when two segments share an id
    """
    transcripts = transcripts or {}
    audio_paths = audio_paths or {}
    manifest = Manifest()
    for segment in segments:
        segment_id = segment.segment_id
        corrected = transcripts.get(segment_id)
        manifest.add(ManifestRow(
            segment_id=segment_id,
            path=audio_paths.get(segment.source_id, ""),
            start=segment.start,
            end=segment.end,
            transcript=corrected if corrected is not None else " ".join(segment.words),
            provenance=Provenance.MANUAL if corrected is not None else Provenance.PSEUDO,
        ))
    logger.info(f"Pseudo-label manifest: {len(manifest)} rows, {len(transcripts)} corrected")
    return manifest


def merge_manifests(*manifests: Manifest) -> Manifest:
    """Concatenate manifests; colliding ids raise DuplicateSegment."""
    merged = Manifest()
    for manifest in manifests:
        merged.extend(manifest)
    return merged


def write_manifest(manifest: Manifest, path: str) -> None:
    log_file_operation("writing manifest", path, logger)
    with atomic_write(path) as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(COLUMNS)
        for row in manifest:
            writer.writerow([row.segment_id, row.path, f"{row.start:.2f}", f"{row.end:.2f}",
                             row.transcript, row.provenance.value])


def read_manifest(path: str) -> Manifest:
    """Read a TSV manifest with header."""
    require_path(path)
    log_file_operation("reading manifest", path, logger)
    manifest = Manifest()
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ManifestFormat(f"{path}: expected header {' '.join(COLUMNS)}")
        for line_number, fields in enumerate(reader, 2):
            if not fields:
                continue
            if len(fields) != len(COLUMNS):
                raise ManifestFormat(f"{path} line {line_number}: expected {len(COLUMNS)} columns")
            try:
                row = ManifestRow(segment_id=fields[0], path=fields[1], start=float(fields[2]),
                                  end=float(fields[3]), transcript=fields[4], provenance=Provenance(fields[5]))
            except ValueError as e:
                raise ManifestFormat(f"{path} line {line_number}: {e}")
            manifest.add(row)
    return manifest
