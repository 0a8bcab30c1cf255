"""
Atomic file output

Every artifact the CLI produces goes through here: content is written to a
temporary file next to the target and renamed over it, so a failed run never
leaves a half-written output behind.
"""

import os
import tempfile
from pathlib import Path
from typing import Union

PathLike = Union[str, os.PathLike]


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write bytes to path via write-temp-then-rename"""
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    # newline translation off: artifacts are byte-identical across platforms
    return atomic_write_bytes(path, text.encode("utf-8"))


def infer_format(path: PathLike, allowed=("csv", "json")) -> str:
    """Guess a file format from its extension"""
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in allowed:
        return suffix
    raise ValueError(f"Cannot infer format from '{path}'; expected one of: {', '.join(allowed)}")
