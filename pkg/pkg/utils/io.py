"""
File helpers shared by all modules: atomic writes and utterance tables.
"""

import os
import tempfile
from contextlib import contextmanager
from typing import Iterator, List, Tuple, IO

from pkg.utils.errors import MissingPath


@contextmanager
def atomic_write(path: str, mode: str = "w", encoding: str = "utf-8") -> Iterator[IO]:
    """
    Open a temporary file next to ``path`` and move it into place on success.

    Args:
        path: Final destination
        mode: "w" for text or "wb" for binary
        encoding: Text encoding (ignored in binary mode)

    Yields:
        Writable file object
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        if "b" in mode:
            f = os.fdopen(fd, mode)
        else:
            f = os.fdopen(fd, mode, encoding=encoding, newline="\n")
        with f:
            yield f
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def require_path(path: str) -> str:
    """Raise MissingPath unless ``path`` exists."""
    if not path or not os.path.exists(path):
        raise MissingPath(f"input path does not exist: {path}")
    return path


def read_table(path: str) -> List[Tuple[str, str]]:
    """
    Read "utt-id<TAB>text" lines.

    Lines without a tab get the id ``utt%06d`` built from the 1-based line number.
    Blank lines are skipped.
    """
    require_path(path)
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if "\t" in line:
                utt_id, text = line.split("\t", 1)
            else:
                utt_id, text = f"utt{line_number:06d}", line
            rows.append((utt_id.strip(), text))
    return rows


def write_table(rows: List[Tuple[str, str]], path: str) -> None:
    """Write "utt-id<TAB>text" lines atomically."""
    with atomic_write(path) as f:
        for utt_id, text in rows:
            f.write(f"{utt_id}\t{text}\n")
