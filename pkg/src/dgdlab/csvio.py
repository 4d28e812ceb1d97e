"""Fixed-schema CSV emission.

Trajectory files: comma-separated, '.' decimal, 17 significant digits,
LF line endings, one row per recorded iteration. The header is part of
the schema and is pinned by a golden test; bump the schema version when
changing it. Columns (1-based agent/coordinate names):

    iter,q_value,q_grad_norm,consensus_err,f_of_mean,mean_x_1..mean_x_n,
    dist_to_ref[,x_1_1..x_m_n]

The per-agent wide columns are optional (``wide_columns``).
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

from .dynamics import Trajectory

TRAJECTORY_SCHEMA_VERSION = "trajectory-v1"
SUMMARY_SCHEMA_VERSION = "summary-v1"


def fmt(x: float) -> str:
    """17-significant-digit decimal rendering (round-trips float64)."""
    return f"{x:.17g}"


def trajectory_header(n: int, m: int, wide_columns: bool) -> list[str]:
    header = ["iter", "q_value", "q_grad_norm", "consensus_err", "f_of_mean"]
    header += [f"mean_x_{j + 1}" for j in range(n)]
    header.append("dist_to_ref")
    if wide_columns:
        header += [f"x_{i + 1}_{j + 1}" for i in range(m) for j in range(n)]
    return header


def trajectory_rows(traj: Trajectory, n: int, m: int, wide_columns: bool):
    for rec in traj.records:
        row = [
            str(rec.iteration),
            fmt(rec.q_value),
            fmt(rec.q_grad_norm),
            fmt(rec.consensus_err),
            fmt(rec.f_of_mean),
        ]
        row += [fmt(v) for v in rec.mean]
        row.append(fmt(rec.dist_to_ref))
        if wide_columns:
            if rec.blocks is None:
                raise ValueError(
                    "wide columns requested but the trajectory was run "
                    "without block tracking"
                )
            row += [fmt(v) for v in rec.blocks.ravel()]
        yield row


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_trajectory_csv(
    path: Path, traj: Trajectory, n: int, m: int, wide_columns: bool
):
    write_csv(
        path,
        trajectory_header(n, m, wide_columns),
        trajectory_rows(traj, n, m, wide_columns),
    )


def summary_header(m: int) -> list[str]:
    header = ["variant", "seed", "escape_iter"]
    header += [f"dist_agent_{i + 1}" for i in range(m)]
    header += ["final_consensus_err", "iterations_run", "stop_reason"]
    return header
