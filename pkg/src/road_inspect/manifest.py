"""Append-only run manifests (one JSON object per line)."""

from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .errors import InputFileError

MANIFEST_NAME = "manifests.jsonl"


def tool_version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # not installed as a distribution
        return "unknown"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 16), b""):
                h.update(chunk)
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return h.hexdigest()


@dataclass
class RunManifest:
    argv: list[str]
    command: str
    cwd: str
    seeds: dict[str, int]
    config: dict[str, Any]
    inputs: dict[str, str]  # path as given -> sha256
    outputs: dict[str, str]  # path relative to outdir (absolute if outside) -> sha256
    outdir: str
    version: str = field(default_factory=tool_version)
    python: str = field(default_factory=lambda: sys.version.split()[0])
    started_at: float = 0.0
    wall_clock_s: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RunManifest":
        return cls(**doc)


def output_key(path: Path, outdir: Path) -> str:
    p, o = Path(path).resolve(), Path(outdir).resolve()
    return p.relative_to(o).as_posix() if p.is_relative_to(o) else str(p)


def digest_outputs(paths: Iterable[Path], outdir: Path) -> dict[str, str]:
    return {output_key(p, outdir): sha256_file(p) for p in sorted(set(paths))}


def append(manifest: RunManifest, outdir: str | Path) -> Path:
    path = Path(outdir) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest.to_dict(), sort_keys=True) + "\n")
    return path


def read_all(path: str | Path) -> list[RunManifest]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputFileError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
    return [RunManifest.from_dict(json.loads(line)) for line in lines if line.strip()]


class Clock:
    """Wall-clock bookkeeping for the manifest; never used for seeding."""

    def __init__(self) -> None:
        self.started_at = time.time()
        self._t0 = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self._t0
