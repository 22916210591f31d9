"""Deterministic CSV/JSON emission and the run manifest.

Every quantitative value is written through these helpers with a fixed
9-significant-digit decimal format, so identical (config, seed) runs produce
byte-identical files on any platform and with any worker count. The manifest
lists every emitted file with its SHA-256 digest.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence


def fmt(value) -> str:
    """Canonical text form: 9 significant digits for floats."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def round9(value: float) -> float:
    """Float rounded to its 9-significant-digit decimal representation."""
    return float(format(value, ".9g"))


def _canonical(obj):
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return round9(obj)
    return obj


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(_canonical(obj), indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def write_manifest(
    out_dir: Path,
    files: Sequence[Path],
    *,
    command: str,
    config_path: str,
    seed: int,
) -> Path:
    """Record the run identity and the digests of everything it emitted."""
    manifest = {
        "command": command,
        "config": config_path,
        "seed": seed,
        "outputs": {f.name: sha256_file(f) for f in files},
    }
    path = out_dir / "manifest.json"
    write_json(path, manifest)
    return path
