"""
Per-iteration solver trace with a fixed CSV schema.
"""
import csv
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List

from loguru import logger

CSV_HEADER = [
    "iter", "res_norm", "alpha", "delta", "err_ref",
    "rank_min", "rank_max", "res_rank_max", "wall_ms",
]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class IterationRecord:
    """
    State of one iteration k.

    Attributes:
        k: Iteration index, starting at 0
        res_norm: ||r_k||
        alpha: Threshold alpha_k used for the step out of u_k
        rank_min: Smallest edge rank of u_k
        rank_max: Largest edge rank of u_k
        res_rank_max: Largest bond dimension of the residual representation
        delta: Residual tolerance delta_k (inexact solver only)
        err_ref: ||u_k - reference|| when a reference is available
        wall_ms: Elapsed milliseconds since the start of the run
    """
    k: int
    res_norm: float
    alpha: float
    rank_min: int
    rank_max: int
    res_rank_max: int
    delta: float | None = None
    err_ref: float | None = None
    wall_ms: float | None = None

    def csv_row(self) -> List[str]:
        values = [
            self.k, self.res_norm, self.alpha, self.delta, self.err_ref,
            self.rank_min, self.rank_max, self.res_rank_max, self.wall_ms,
        ]
        return [_cell(v) for v in values]


@dataclass
class IterationTrace:
    """Append-only sequence of IterationRecords for one solver run."""
    solver: str
    rows: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, record: IterationRecord) -> None:
        if self.rows and record.k <= self.rows[-1].k:
            raise ValueError(f"iteration {record.k} does not follow {self.rows[-1].k}")
        self.rows.append(record)

    @property
    def last(self) -> IterationRecord | None:
        return self.rows[-1] if self.rows else None

    def column(self, name: str) -> list:
        if name not in {f.name for f in fields(IterationRecord)}:
            raise KeyError(name)
        return [getattr(row, name) for row in self.rows]

    def to_csv(self, path: str | Path) -> Path:
        """
        Write the trace with the fixed header.

        Args:
            path: Output file, parent directories are created

        Returns:
            Path written
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in self.rows:
                writer.writerow(row.csv_row())
        logger.info(f"Wrote {len(self.rows)} {self.solver} rows to {path}")
        return path
