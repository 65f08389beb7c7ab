"""Interchange formats: statistics files, report files and realization files.

Statistics file (line-delimited JSON, one object per line)::

    {"format": "hardy-stats", "version": 1, "d": 3, "indexing": "...", "metadata": {...}}
    {"i": 0, "j": 0, "p": [[...], [...], [...]]}
    ... one line per setting pair (i, j), i and j 0-based

Floats are written with 17 significant digits, so a write/read round trip is
bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .hardy import ProbabilityTable, Realization
from .linalg import DensityOperator, PovmSet, complex_to_pairs, pairs_to_complex

STATS_FORMAT = "hardy-stats"
STATS_VERSION = 1
REPORT_VERSION = 1
REALIZATION_FORMAT = "hardy-realization"
REALIZATION_VERSION = 1
EXTERNAL_SUM_TOL = 1e-6
INDEXING_NOTE = (
    "settings i, j and outcomes m, n are 0-based; i = 0 is A1, i = 1 is A2, j = 0 is B1, j = 1 is B2; "
    "p[m][n] = P(A_{i+1} = m, B_{j+1} = n)"
)


class StatsFormatError(ValueError):
    """Malformed statistics file; carries the offending line and field."""

    def __init__(self, line: int, fieldname: str, message: str):
        super().__init__(f"line {line}, field {fieldname!r}: {message}")
        self.line = line
        self.field = fieldname


@dataclass(frozen=True)
class StatsFile:
    table: ProbabilityTable
    metadata: dict[str, str] = field(default_factory=dict)
    version: int = STATS_VERSION

    @property
    def d(self) -> int:
        return self.table.d


def _num(x: float) -> str:
    return format(float(x), ".17g")


def dumps_stats(stats: StatsFile) -> str:
    header = {
        "format": STATS_FORMAT,
        "version": stats.version,
        "d": stats.d,
        "indexing": INDEXING_NOTE,
        "metadata": {str(k): str(v) for k, v in sorted(stats.metadata.items())},
    }
    lines = [json.dumps(header, sort_keys=True)]
    for i in range(2):
        for j in range(2):
            rows = ",".join("[" + ",".join(_num(x) for x in row) + "]" for row in stats.table.p[i, j])
            lines.append(f'{{"i": {i}, "j": {j}, "p": [{rows}]}}')
    return "\n".join(lines) + "\n"


def write_stats(path: str | Path, stats: StatsFile) -> None:
    Path(path).write_text(dumps_stats(stats))


def loads_stats(text: str, sum_tol: float = EXTERNAL_SUM_TOL) -> StatsFile:
    lines = [(n, s) for n, s in enumerate(text.splitlines(), start=1) if s.strip()]
    if not lines:
        raise StatsFormatError(1, "format", "empty file")

    def parse(n: int, s: str) -> dict:
        try:
            obj = json.loads(s)
        except json.JSONDecodeError as exc:
            raise StatsFormatError(n, "<json>", f"not valid JSON ({exc.msg} at column {exc.colno})") from None
        if not isinstance(obj, dict):
            raise StatsFormatError(n, "<json>", "expected an object")
        return obj

    n0, s0 = lines[0]
    header = parse(n0, s0)
    if header.get("format") != STATS_FORMAT:
        raise StatsFormatError(n0, "format", f"expected {STATS_FORMAT!r}, got {header.get('format')!r}")
    version = header.get("version")
    if version != STATS_VERSION:
        raise StatsFormatError(n0, "version", f"unsupported version {version!r}")
    d = header.get("d")
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise StatsFormatError(n0, "d", f"expected an integer >= 2, got {d!r}")
    metadata = header.get("metadata", {})
    if not isinstance(metadata, dict):
        raise StatsFormatError(n0, "metadata", "expected an object")

    p = np.full((2, 2, d, d), np.nan)
    seen = set()
    for n, s in lines[1:]:
        obj = parse(n, s)
        for key in ("i", "j"):
            v = obj.get(key)
            if v not in (0, 1) or isinstance(v, bool):
                raise StatsFormatError(n, key, f"expected 0 or 1, got {v!r}")
        i, j = obj["i"], obj["j"]
        if (i, j) in seen:
            raise StatsFormatError(n, "i,j", f"duplicate setting pair ({i}, {j})")
        seen.add((i, j))
        try:
            block = np.array(obj.get("p"), dtype=float)
        except (TypeError, ValueError):
            raise StatsFormatError(n, "p", "entries must be numbers") from None
        if block.shape != (d, d):
            raise StatsFormatError(n, "p", f"expected a {d}x{d} array, got shape {block.shape}")
        if not np.all(np.isfinite(block)):
            raise StatsFormatError(n, "p", "entries must be finite")
        if np.min(block) < -1e-12:
            raise StatsFormatError(n, "p", f"negative probability {np.min(block):.3e}")
        total = float(block.sum())
        if abs(total - 1) > sum_tol:
            raise StatsFormatError(n, "p", f"probabilities sum to {total:.12g}, not 1 within {sum_tol:g}")
        p[i, j] = block
    missing = sorted({(i, j) for i in range(2) for j in range(2)} - seen)
    if missing:
        raise StatsFormatError(lines[-1][0], "i,j", f"missing setting pairs {missing}")
    return StatsFile(ProbabilityTable(d, p), {str(k): str(v) for k, v in metadata.items()}, version)


def read_stats(path: str | Path, sum_tol: float = EXTERNAL_SUM_TOL) -> StatsFile:
    return loads_stats(Path(path).read_text(), sum_tol)


# ---------------------------------------------------------------------------
# realizations


def realization_to_dict(r: Realization) -> dict:
    return {
        "format": REALIZATION_FORMAT,
        "version": REALIZATION_VERSION,
        "local_dims": list(r.local_dims),
        "outcomes": r.outcomes,
        "state": complex_to_pairs(r.state.matrix),
        "alice": [[complex_to_pairs(e) for e in povm.effects] for povm in r.alice],
        "bob": [[complex_to_pairs(e) for e in povm.effects] for povm in r.bob],
    }


def realization_from_dict(obj: Mapping[str, Any]) -> Realization:
    if obj.get("format") != REALIZATION_FORMAT:
        raise ValueError(f"expected a {REALIZATION_FORMAT!r} record")
    if obj.get("version") != REALIZATION_VERSION:
        raise ValueError(f"unsupported realization version {obj.get('version')!r}")
    d_a, d_b = (int(x) for x in obj["local_dims"])

    def povms(entries, dim):
        return tuple(PovmSet(dim, tuple(pairs_to_complex(e) for e in setting)) for setting in entries)

    state = DensityOperator((d_a, d_b), pairs_to_complex(obj["state"]))
    return Realization(state, povms(obj["alice"], d_a), povms(obj["bob"], d_b))


def read_realization(path: str | Path) -> Realization:
    """Realization from a realization file or from an optimize report that embeds one."""
    obj = json.loads(Path(path).read_text())
    if obj.get("format") != REALIZATION_FORMAT and isinstance(obj.get("outputs"), dict):
        obj = obj["outputs"].get("realization", {})
    return realization_from_dict(obj)


def write_realization(path: str | Path, r: Realization) -> None:
    Path(path).write_text(json.dumps(realization_to_dict(r), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# reports


def digest(payload: Any, files: Mapping[str, str | Path] | None = None) -> str:
    """sha256 over canonical JSON of ``payload`` followed by the bytes of each input file."""
    h = hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode())
    for name in sorted(files or {}):
        h.update(name.encode())
        h.update(Path(files[name]).read_bytes())
    return h.hexdigest()


def _plain(x: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays become Python numbers and lists."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


@dataclass(frozen=True)
class ReportFile:
    command: str
    inputs_digest: str
    outputs: dict
    seeds: dict
    tolerances: dict
    wall_time: float
    version: int = REPORT_VERSION

    def as_dict(self) -> dict:
        return _plain(
            {
                "version": self.version,
                "command": self.command,
                "inputs_digest": self.inputs_digest,
                "outputs": self.outputs,
                "seeds": self.seeds,
                "tolerances": self.tolerances,
                "wall_time": self.wall_time,
            }
        )

    def dumps(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


def read_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def comparable(report: Mapping[str, Any]) -> dict:
    """Report fields that must be reproducible (everything except wall time)."""
    return {k: v for k, v in report.items() if k != "wall_time"}
