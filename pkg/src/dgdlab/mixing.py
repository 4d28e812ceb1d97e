"""Mixing-matrix validation, spectral summary, and the lifted averaging operator.

A valid mixing matrix ``W`` is symmetric, doubly stochastic, strictly
diagonally dominant (hence positive definite), and consistent with the
communication graph: ``W[i,i] > 0`` and ``W[i,j] > 0`` exactly when
``(i,j)`` is an edge. On a connected graph its spectrum lies in ``(0, 1]``
with a single eigenvalue equal to 1.

The lifted operator ``W (kron) I_n`` is only ever applied blockwise; the
``m*n x m*n`` matrix is never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NetworkGraph, is_connected

#: absolute tolerance for the structural checks (symmetry, stochasticity)
DEFAULT_VALIDATION_TOL = 1e-12

#: tolerance on the unit Perron eigenvalue of a valid W
SPECTRAL_TOL = 1e-9


class MixingValidationError(ValueError):
    """Mixing matrix failed validation; ``code`` identifies the check.

    Codes: ``shape``, ``asymmetric``, ``not-doubly-stochastic``,
    ``graph-mismatch``, ``not-diagonally-dominant``, ``spectral``.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class SpectralInfo:
    """Eigenvalue summary of a validated mixing matrix.

    ``lambda_2`` is the second-largest eigenvalue counting multiplicity;
    it is ``None`` for a single-agent network, where only the unit
    eigenvalue exists.
    """

    lambda_max: float
    lambda_2: float | None
    lambda_min: float
    eigenvalues: tuple[float, ...]

    @property
    def spectral_gap(self) -> float | None:
        return None if self.lambda_2 is None else 1.0 - self.lambda_2


@dataclass(frozen=True)
class MixingMatrix:
    """Validated dense mixing matrix with its spectral summary."""

    m: int
    entries: np.ndarray
    spectral: SpectralInfo

    def __post_init__(self):
        self.entries.setflags(write=False)


def validate_mixing(
    w,
    g: NetworkGraph,
    tol: float = DEFAULT_VALIDATION_TOL,
) -> MixingMatrix:
    """Validate ``w`` against the structural requirements and summarize its spectrum.

    Checks, in order: shape, symmetry, double stochasticity, consistency
    with the graph's sparsity pattern, and strict diagonal dominance.
    The spectral summary comes from a dense symmetric eigensolve; on a
    connected graph exactly one eigenvalue may equal 1.

    Raises
    ------
    MixingValidationError
        With a distinct ``code`` per failed check.
    """
    w = np.asarray(w, dtype=float)
    m = g.num_agents
    if w.shape != (m, m):
        raise MixingValidationError(
            "shape", f"matrix shape {w.shape} does not match {m} agents"
        )
    if not np.all(np.isfinite(w)):
        raise MixingValidationError("shape", "matrix contains non-finite entries")

    asym = np.abs(w - w.T).max()
    if asym > tol:
        raise MixingValidationError(
            "asymmetric", f"max |W[i,j] - W[j,i]| = {asym:.3e} exceeds {tol:.1e}"
        )

    row_sums = w.sum(axis=1)
    col_sums = w.sum(axis=0)
    bad_row = int(np.abs(row_sums - 1.0).argmax())
    bad_col = int(np.abs(col_sums - 1.0).argmax())
    if abs(row_sums[bad_row] - 1.0) > tol or abs(col_sums[bad_col] - 1.0) > tol:
        raise MixingValidationError(
            "not-doubly-stochastic",
            f"row sums / column sums must be 1 within {tol:.1e}: "
            f"row {bad_row + 1} sums to {row_sums[bad_row]!r}, "
            f"column {bad_col + 1} sums to {col_sums[bad_col]!r}",
        )

    edge_set = set(g.edges)
    for i in range(m):
        if w[i, i] <= 0.0:
            raise MixingValidationError(
                "graph-mismatch", f"diagonal entry W[{i + 1},{i + 1}] must be positive"
            )
        for j in range(i + 1, m):
            has_edge = (i, j) in edge_set
            if has_edge and w[i, j] <= 0.0:
                raise MixingValidationError(
                    "graph-mismatch",
                    f"W[{i + 1},{j + 1}] = {w[i, j]!r} but agents "
                    f"{i + 1} and {j + 1} share an edge",
                )
            if not has_edge and w[i, j] != 0.0:
                raise MixingValidationError(
                    "graph-mismatch",
                    f"W[{i + 1},{j + 1}] = {w[i, j]!r} but agents "
                    f"{i + 1} and {j + 1} share no edge",
                )

    off_diag = w.sum(axis=1) - np.diag(w)
    for i in range(m):
        if not w[i, i] > off_diag[i]:
            raise MixingValidationError(
                "not-diagonally-dominant",
                f"W[{i + 1},{i + 1}] = {w[i, i]!r} does not strictly exceed the "
                f"off-diagonal row mass {off_diag[i]!r}",
            )

    eigenvalues = np.linalg.eigvalsh(w)
    lam_min = float(eigenvalues[0])
    lam_max = float(eigenvalues[-1])
    lam_2 = float(eigenvalues[-2]) if m > 1 else None
    if abs(lam_max - 1.0) > SPECTRAL_TOL:
        raise MixingValidationError(
            "spectral", f"largest eigenvalue is {lam_max!r}, expected 1"
        )
    if lam_min <= 0.0:
        raise MixingValidationError(
            "spectral",
            f"minimum eigenvalue {lam_min!r} is not positive despite diagonal "
            "dominance; matrix is numerically degenerate",
        )
    if lam_2 is not None and is_connected(g) and not lam_2 < 1.0 - SPECTRAL_TOL:
        raise MixingValidationError(
            "spectral",
            f"second-largest eigenvalue {lam_2!r} reaches 1 on a connected graph",
        )

    spectral = SpectralInfo(
        lambda_max=lam_max,
        lambda_2=lam_2,
        lambda_min=lam_min,
        eigenvalues=tuple(float(v) for v in eigenvalues),
    )
    return MixingMatrix(m=m, entries=w.copy(), spectral=spectral)


def apply_lifted(w: MixingMatrix, stacked: np.ndarray) -> np.ndarray:
    """Apply ``W (kron) I_n`` to a stacked state, blockwise.

    ``stacked`` has shape ``(m, n)`` with one agent block per row; block
    ``i`` of the result is ``sum_j W[i,j] * stacked[j]``.
    """
    stacked = np.asarray(stacked, dtype=float)
    if stacked.ndim != 2 or stacked.shape[0] != w.m:
        raise ValueError(
            f"stacked state has shape {stacked.shape}, expected ({w.m}, n)"
        )
    return w.entries @ stacked


def consensus_average(stacked: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the agent blocks (a vector of length n)."""
    stacked = np.asarray(stacked, dtype=float)
    if stacked.ndim != 2:
        raise ValueError(f"stacked state has shape {stacked.shape}, expected (m, n)")
    return stacked.mean(axis=0)
