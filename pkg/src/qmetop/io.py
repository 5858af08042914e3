"""Matrix interchange files and run manifests."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def matrix_to_json_obj(M: np.ndarray, kind: str, basis_order: str | None = None, **meta: Any) -> dict:
    """Complex matrix as ``[re, im]`` pairs in row-major nested lists."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    obj = {
        "format": FORMAT_VERSION,
        "kind": kind,
        "shape": list(M.shape),
        "basis_order": basis_order,
        "data": [[[float(z.real), float(z.imag)] for z in row] for row in M],
    }
    obj.update(meta)
    return obj


def matrix_from_json_obj(obj: Mapping) -> tuple[np.ndarray, dict]:
    try:
        data = np.array(obj["data"], dtype=float)
        shape = tuple(obj["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError("matrix JSON needs 'shape' and 'data' entries of [re, im] pairs") from exc
    if data.shape != shape + (2,):
        raise FormatError(f"matrix data shape {data.shape[:-1]} does not match declared shape {shape}")
    M = data[..., 0] + 1j * data[..., 1]
    meta = {k: v for k, v in obj.items() if k != "data"}
    return M, meta


def write_matrix(path: str | Path, M: np.ndarray, kind: str, basis_order: str | None = None, **meta: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(matrix_to_json_obj(M, kind, basis_order, **meta), indent=1) + "\n")
    return path


def read_matrix(path: str | Path) -> tuple[np.ndarray, dict]:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return matrix_from_json_obj(obj)


_HEADER_ORDER = re.compile(r"basis_order\s*:\s*(\w+)")


def load_table(source: str | Path) -> tuple[np.ndarray, dict]:
    """Real square matrix from text with whitespace, ``|`` or ``&`` separators.

    Lines starting with ``#`` are comments; a ``basis_order: tag`` comment is
    returned in the metadata. LaTeX row terminators are ignored.
    """
    text = Path(source).read_text()
    meta: dict = {}
    rows = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _HEADER_ORDER.search(s)
            if m:
                meta["basis_order"] = m.group(1)
            continue
        s = s.replace("\\\\", " ").replace("\\hline", " ")
        parts = [p for p in re.split(r"[&|\s]+", s) if p]
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"{source}: non-numeric entry in line {line!r}") from exc
    if not rows or any(len(r) != len(rows) for r in rows):
        raise FormatError(f"{source}: expected a square table, got {len(rows)} rows of lengths {sorted({len(r) for r in rows})}")
    return np.array(rows), meta


def reference_gamma_path() -> Path:
    """Shipped 15 x 15 local coefficient matrix for the six-qubit, two-coupled-qubit chain."""
    return Path(str(resources.files("qmetop") / "data" / "reference_gamma_L.txt"))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    """What produced a set of output files; the digest excludes wall time."""

    command: str
    config: dict
    numerics: dict
    outputs: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def digest(self) -> str:
        return digest({"command": self.command, "config": self.config, "numerics": self.numerics})

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "digest": self.digest,
            "config": self.config,
            "numerics": self.numerics,
            "outputs": self.outputs,
            "wall_time": self.wall_time,
        }

    def write(self, out_dir: Path) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=1, default=_default) + "\n")
        return path
