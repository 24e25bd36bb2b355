"""Flat ``key = value`` documents used for run configs and hyperparameter dumps."""
from pathlib import Path
from typing import Dict, Mapping, Union

from common.exceptions import DataFormatError


def parse_kv(text: str) -> Dict[str, str]:
    entries: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise DataFormatError(f"line {lineno}: empty key")
        if key in entries:
            raise DataFormatError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def dump_kv(entries: Mapping[str, object]) -> str:
    lines = []
    for key, value in entries.items():
        if value is None:
            continue
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def load_kv(path: Union[str, Path]) -> Dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DataFormatError(f"cannot read config {path}: {e}") from e
    return parse_kv(text)


def get_bool(entries: Mapping[str, str], key: str, default: bool) -> bool:
    if key not in entries:
        return default
    value = entries[key].strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise DataFormatError(f"{key}: expected a boolean, got {entries[key]!r}")
