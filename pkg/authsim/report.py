"""
Write a MetricsBundle to disk.

Four files, all byte-deterministic for a given bundle and overwritten in
place on re-runs: ``metrics.json`` (canonical JSON), ``trust_trajectories.csv``,
``outcomes.jsonl`` and ``costs.csv``.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from .contracts import COST_COLUMNS, TRAJECTORY_COLUMNS
from .errors import ReportIOError
from .harness import MetricsBundle
from .protocol import FleetCost
from .utils import canonical

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.json"
TRAJECTORIES_FILE = "trust_trajectories.csv"
OUTCOMES_FILE = "outcomes.jsonl"
COSTS_FILE = "costs.csv"


def _csv_text(columns: Sequence[str], rows: Iterable[Dict[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"Cannot write {path}: {exc}") from exc
    return path


def _prepare(out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"Cannot create output directory {out_dir}: {exc}") from exc
    if not out_dir.is_dir():
        raise ReportIOError(f"Output path is not a directory: {out_dir}")
    return out_dir


def write_costs(costs: Sequence[FleetCost], out_dir: Path) -> Path:
    out_dir = _prepare(out_dir)
    return _write(out_dir / COSTS_FILE, _csv_text(COST_COLUMNS, (c.row() for c in costs)))


def write_report(bundle: MetricsBundle, out_dir: Path) -> List[Path]:
    """Write the four output files; returns their paths."""
    out_dir = _prepare(out_dir)
    written = [
        _write(out_dir / METRICS_FILE, canonical.dumps(bundle.metrics) + "\n"),
        _write(
            out_dir / TRAJECTORIES_FILE,
            _csv_text(TRAJECTORY_COLUMNS, (r.row() for r in bundle.trajectories)),
        ),
        _write(out_dir / OUTCOMES_FILE, "".join(canonical.dumps(o) + "\n" for o in bundle.outcomes)),
        write_costs(bundle.costs, out_dir),
    ]
    logger.info("wrote %d files to %s", len(written), out_dir)
    return written
