"""
File helpers: atomic writes, JSON / JSON Lines records, directory digests
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Tuple, Union

from ..core.errors import FormatError
from .config import JSON_INDENT

PathLike = Union[str, os.PathLike]


def atomic_write_bytes(path: PathLike, data: bytes):
    """
    Write bytes to path via a temporary file and rename

    Args:
        path: Destination file
        data: Content
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def atomic_write_text(path: PathLike, text: str):
    # LF endings regardless of platform
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(payload: Any) -> str:
    return json.dumps(payload, indent=JSON_INDENT, ensure_ascii=False, sort_keys=False) + "\n"


def write_json(path: PathLike, payload: Any):
    atomic_write_text(path, dump_json(payload))


def read_json(path: PathLike) -> Any:
    """
    Load a JSON document

    Args:
        path: Path to JSON file

    Returns:
        Parsed document
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path=str(path), line=e.lineno) from e


def write_json_lines(path: PathLike, records: Iterable[Dict[str, Any]]):
    lines = [json.dumps(record, ensure_ascii=False) for record in records]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def iter_json_lines(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """
    Iterate over the objects of a JSON Lines file

    Blank lines are skipped. Every other line must hold one JSON object.

    Args:
        path: Path to the .jsonl file

    Yields:
        (line number, record) pairs, line numbers starting at 1
    """
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e.msg}", path=str(path), line=line_no) from e
            if not isinstance(record, dict):
                raise FormatError("expected a JSON object", path=str(path), line=line_no)
            yield line_no, record


def require_fields(record: Dict[str, Any], fields: Iterable[str], path: PathLike, line: int):
    """
    Check that a record carries every required, non-null field

    Args:
        record: Parsed record
        fields: Required keys
        path: Source file, for diagnostics
        line: Source line, for diagnostics
    """
    missing = [name for name in fields if record.get(name) is None]
    if missing:
        raise FormatError(f"missing field(s): {', '.join(missing)}", path=str(path), line=line)


def directory_digest(root: PathLike) -> str:
    """
    SHA-256 over every file below root (relative path and bytes, sorted)

    Args:
        root: Directory to hash

    Returns:
        Hex digest
    """
    root = Path(root)
    digest = hashlib.sha256()
    files: List[Path] = sorted(p for p in root.rglob("*") if p.is_file())
    for file_path in files:
        digest.update(file_path.relative_to(root).as_posix().encode("utf-8"))
        digest.update(b"\0")
        digest.update(file_path.read_bytes())
        digest.update(b"\0")
    return digest.hexdigest()
