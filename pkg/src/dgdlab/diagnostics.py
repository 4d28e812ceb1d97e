"""Quantitative diagnostics over problems, states, and trajectories.

Bound evaluators compare a measured quantity at an (approximately)
stationary point of the penalized objective Q against its closed-form
bound. With ``lambda_2`` the second-largest mixing eigenvalue and
``g* = ||F_grad||`` at the stationary point:

* per-agent consensus distance:        ``||x_i - mean|| <= alpha g* / (1 - lambda_2)``
* gradient of f at the consensus mean: ``||f_grad(mean)|| <= alpha L_g m sqrt(m) g* / (1 - lambda_2)``
* curvature of f at the consensus
  mean: ``lambda_min(f_hess(mean)) >= -alpha L_H m^2 g* / (1 - lambda_2)``

where ``L_g`` and ``L_H`` are the aggregate gradient/Hessian Lipschitz
constants, which the caller must supply as objective metadata (valid
over the region the run explored; quartics have no global constants).

The bounds hold for exact minimizers of Q; numerically we accept a point
with small ``||q_grad||`` and attach the residual as a caveat to every
report rather than pretending exactness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .dynamics import Trajectory
from .mixing import apply_lifted, consensus_average
from .noise import NoiseSpec, agent_streams, sample
from .objective import (
    F_grad,
    Problem,
    as_state,
    f_grad,
    f_hess,
    lipschitz_aggregate,
    q_grad,
    q_hess_min_eig,
    q_value,
)

#: residual gradient norm accepted when treating a point as stationary
DEFAULT_STATIONARITY_TOL = 1e-8

#: slack added to "measured <= bound" comparisons to absorb roundoff
REPORT_TOL = 1e-9


class LipschitzUnavailableError(ValueError):
    """A bound evaluator needs Lipschitz metadata the objectives lack."""


@dataclass(frozen=True)
class BoundReport:
    """One measured-vs-bound comparison."""

    quantity: str
    measured: float
    bound: float
    satisfied: bool
    slack: float
    caveat: str | None = None


def _make_report(quantity: str, measured: float, bound: float, caveat: str | None):
    tol = REPORT_TOL * max(1.0, abs(bound))
    return BoundReport(
        quantity=quantity,
        measured=float(measured),
        bound=float(bound),
        satisfied=bool(measured <= bound + tol),
        slack=float(bound - measured),
        caveat=caveat,
    )


def _stationarity_caveat(p: Problem, alpha: float, stacked, tol: float):
    residual = float(np.linalg.norm(q_grad(p, alpha, stacked)))
    caveat = f"||q_grad|| = {residual:.3e} at the evaluated point"
    if residual > tol:
        caveat += f" (exceeds stationarity tolerance {tol:.1e})"
    return residual, caveat


def _spectral_gap(p: Problem) -> float:
    lam2 = p.mixing.spectral.lambda_2
    if lam2 is None:
        # single agent: no disagreement directions, bound denominator is 1
        return 1.0
    return 1.0 - lam2


def consensus_distance_check(
    p: Problem,
    alpha: float,
    stacked: np.ndarray,
    stationarity_tol: float = DEFAULT_STATIONARITY_TOL,
) -> list[BoundReport]:
    """Per-agent distance to the consensus mean vs its spectral bound."""
    stacked = as_state(stacked, p.num_agents, p.dim)
    _, caveat = _stationarity_caveat(p, alpha, stacked, stationarity_tol)
    mean = consensus_average(stacked)
    bound = alpha * float(np.linalg.norm(F_grad(p, stacked))) / _spectral_gap(p)
    return [
        _make_report(
            f"agent {i + 1} distance to consensus mean",
            float(np.linalg.norm(stacked[i] - mean)),
            bound,
            caveat,
        )
        for i in range(p.num_agents)
    ]


def mean_gradient_check(
    p: Problem,
    alpha: float,
    stacked: np.ndarray,
    stationarity_tol: float = DEFAULT_STATIONARITY_TOL,
) -> BoundReport:
    """Gradient norm of the global objective at the consensus mean vs bound."""
    stacked = as_state(stacked, p.num_agents, p.dim)
    constants = lipschitz_aggregate(p, alpha)
    if constants.l_f_grad is None:
        raise LipschitzUnavailableError(
            "gradient Lipschitz metadata unavailable on at least one objective"
        )
    _, caveat = _stationarity_caveat(p, alpha, stacked, stationarity_tol)
    m = p.num_agents
    mean = consensus_average(stacked)
    bound = (
        alpha
        * constants.l_f_grad
        * m
        * math.sqrt(m)
        * float(np.linalg.norm(F_grad(p, stacked)))
        / _spectral_gap(p)
    )
    return _make_report(
        "gradient norm of f at consensus mean",
        float(np.linalg.norm(f_grad(p, mean))),
        bound,
        caveat,
    )


def mean_curvature_check(
    p: Problem,
    alpha: float,
    stacked: np.ndarray,
    stationarity_tol: float = DEFAULT_STATIONARITY_TOL,
) -> BoundReport:
    """Minimum Hessian eigenvalue of f at the consensus mean vs bound.

    Reported as ``-lambda_min <= bound`` so that ``satisfied`` keeps the
    same orientation as the other checks.
    """
    stacked = as_state(stacked, p.num_agents, p.dim)
    constants = lipschitz_aggregate(p, alpha)
    if constants.l_f_hess is None:
        raise LipschitzUnavailableError(
            "Hessian Lipschitz metadata unavailable on at least one objective"
        )
    _, caveat = _stationarity_caveat(p, alpha, stacked, stationarity_tol)
    m = p.num_agents
    mean = consensus_average(stacked)
    min_eig = float(np.linalg.eigvalsh(f_hess(p, mean))[0])
    bound = (
        alpha
        * constants.l_f_hess
        * m
        * m
        * float(np.linalg.norm(F_grad(p, stacked)))
        / _spectral_gap(p)
    )
    return _make_report(
        "negative part of min f-Hessian eigenvalue at consensus mean",
        -min_eig,
        bound,
        caveat,
    )


# ---------------------------------------------------------------------------
# step-size caps


@dataclass(frozen=True)
class StepSizeCaps:
    """The two closed-form step-size caps for a confidence level ``zeta``.

    ``cap_sqrt2 = (sqrt(2) - 1) / L_g`` and
    ``cap_spectral = lambda_min(W) / (L_g * max(1, log(1/zeta)))``. A
    third cap tied to the target neighborhood size exists only as an
    existence statement, with no computable constant; it is reported as
    non-constructive.
    """

    cap_sqrt2: float
    cap_spectral: float
    note: str = (
        "a third cap (threshold guaranteeing proximity of penalized-objective "
        "minimizers) is non-constructive and cannot be evaluated"
    )


def step_size_caps(p: Problem, zeta: float) -> StepSizeCaps:
    if not 0 < zeta < 1:
        raise ValueError(f"zeta must be in (0, 1), got {zeta}")
    constants = lipschitz_aggregate(p, alpha=1.0)
    if constants.l_f_grad is None:
        raise LipschitzUnavailableError(
            "gradient Lipschitz metadata unavailable on at least one objective"
        )
    l_g = constants.l_f_grad
    lam_min = p.mixing.spectral.lambda_min
    return StepSizeCaps(
        cap_sqrt2=(math.sqrt(2.0) - 1.0) / l_g,
        cap_spectral=lam_min / (l_g * max(1.0, math.log(1.0 / zeta))),
    )


# ---------------------------------------------------------------------------
# regularity-region membership


@dataclass(frozen=True)
class RegularityParams:
    """Thresholds carving the stacked space into analysis regions."""

    epsilon: float
    gamma: float
    mu: float
    delta: float
    alpha: float

    def __post_init__(self):
        for name in ("epsilon", "gamma", "mu", "delta", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class RegionMembership:
    """Which analysis regions a stacked point belongs to.

    ``large_gradient``: the Q gradient norm reaches ``epsilon``.
    ``negative_curvature``: the minimum Q-Hessian eigenvalue is at most
    ``-gamma`` (a descent direction exists).
    ``near_minimizer_partial``: curvature at least ``mu`` and, when a
    candidate-minimizer list is supplied, distance to it at most
    ``delta``. Partial because only user-supplied or run-discovered
    candidates can be checked; the full minimizer set is not computable.
    """

    large_gradient: bool
    negative_curvature: bool
    near_minimizer_partial: bool
    grad_norm: float
    min_curvature: float
    dist_to_candidates: float | None


def region_membership(
    p: Problem,
    params: RegularityParams,
    stacked: np.ndarray,
    minimizer_candidates: Sequence[np.ndarray] | None = None,
) -> RegionMembership:
    stacked = as_state(stacked, p.num_agents, p.dim)
    constants = lipschitz_aggregate(p, params.alpha)
    if constants.l_f_grad is not None:
        if params.gamma > constants.l_f_grad or params.mu > constants.l_f_grad:
            raise ValueError(
                "gamma and mu must not exceed the aggregate gradient Lipschitz "
                f"constant {constants.l_f_grad}"
            )
    grad_norm = float(np.linalg.norm(q_grad(p, params.alpha, stacked)))
    min_curv = q_hess_min_eig(p, params.alpha, stacked)
    dist = None
    if minimizer_candidates:
        dist = min(
            float(
                np.linalg.norm(
                    stacked - as_state(c, p.num_agents, p.dim)
                )
            )
            for c in minimizer_candidates
        )
    near = min_curv >= params.mu and (dist is None or dist <= params.delta)
    return RegionMembership(
        large_gradient=grad_norm >= params.epsilon,
        negative_curvature=min_curv <= -params.gamma,
        near_minimizer_partial=near,
        grad_norm=grad_norm,
        min_curvature=min_curv,
        dist_to_candidates=dist,
    )


# ---------------------------------------------------------------------------
# one-step expected descent


@dataclass(frozen=True)
class DescentEstimate:
    """Monte-Carlo estimate of the one-step expected change in Q.

    ``bound`` is ``-(lambda_min(W)/2) alpha m n sigma^2`` with
    ``sigma^2`` the realized per-coordinate noise variance. Note the
    stated bound needs the variance at or below half the budget to
    follow from the one-step expansion, which is why the default noise
    safety factor is 0.5; the comparison is reported as-is.
    """

    mean_delta_q: float
    std_err: float
    bound: float
    grad_norm: float
    num_samples: int


def expected_descent_mc(
    p: Problem,
    alpha: float,
    stacked: np.ndarray,
    noise_spec: NoiseSpec,
    num_samples: int,
    master_seed: int = 0,
) -> DescentEstimate:
    """Estimate ``E[Q(next) - Q(current)]`` over fresh perturbation draws.

    Requires the large-gradient hypothesis ``||q_grad|| >= epsilon`` when
    the noise spec carries an ``epsilon``; refuses to run otherwise, with
    the measured norm in the error message.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    stacked = as_state(stacked, p.num_agents, p.dim)
    m, n = p.num_agents, p.dim
    spec = noise_spec.resolved(m, n, p.mixing.spectral.lambda_min)
    grad_norm = float(np.linalg.norm(q_grad(p, alpha, stacked)))
    if spec.epsilon is not None and grad_norm < spec.epsilon:
        raise ValueError(
            f"large-gradient hypothesis violated: ||q_grad|| = {grad_norm!r} "
            f"< epsilon = {spec.epsilon!r}"
        )
    sigma_sq = spec.per_coordinate_variance(n)
    bound = -0.5 * p.mixing.spectral.lambda_min * alpha * m * n * sigma_sq

    q0 = q_value(p, alpha, stacked)
    mixed = apply_lifted(p.mixing, stacked)
    grads = F_grad(p, stacked)
    if spec.kind == "none":
        delta = q_value(p, alpha, mixed - alpha * grads) - q0
        return DescentEstimate(
            mean_delta_q=float(delta),
            std_err=0.0,
            bound=bound,
            grad_norm=grad_norm,
            num_samples=1,
        )

    streams = agent_streams(master_seed, m)
    deltas = np.empty(num_samples)
    for s in range(num_samples):
        xi = np.stack([sample(spec, streams[i], n, s) for i in range(m)])
        deltas[s] = q_value(p, alpha, mixed - alpha * (grads + xi)) - q0
    std_err = (
        float(deltas.std(ddof=1) / math.sqrt(num_samples)) if num_samples > 1 else 0.0
    )
    return DescentEstimate(
        mean_delta_q=float(deltas.mean()),
        std_err=std_err,
        bound=bound,
        grad_norm=grad_norm,
        num_samples=num_samples,
    )


# ---------------------------------------------------------------------------
# trajectory analysis


class ReferenceDistance(NamedTuple):
    distance: float
    index: int


def dist_to_reference(
    x: np.ndarray, refs: Sequence[np.ndarray]
) -> ReferenceDistance:
    """Minimum Euclidean distance to the references; ties pick the lowest index."""
    if len(refs) == 0:
        raise ValueError("reference list must be nonempty")
    x = np.asarray(x, dtype=float)
    dists = [float(np.linalg.norm(x - np.asarray(r, dtype=float))) for r in refs]
    idx = int(np.argmin(dists))
    return ReferenceDistance(distance=dists[idx], index=idx)


def escape_iteration(
    traj: Trajectory, center: np.ndarray, radius: float
) -> int | None:
    """First recorded iteration whose consensus mean leaves the ball.

    Returns the smallest recorded iteration with
    ``||mean - center|| > radius``, or ``None`` if the trajectory never
    leaves.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)
    for record in traj.records:
        if float(np.linalg.norm(record.mean - center)) > radius:
            return record.iteration
    return None


# ---------------------------------------------------------------------------
# empirical assumption probes


@dataclass(frozen=True)
class CoercivityProbe:
    """Empirical shell check of coercivity for one objective.

    Samples points on a sphere of the given radius and reports the
    minimum objective value there against the value at the center. A
    negative margin flags a descent direction escaping to the shell;
    this is a report, never a rejection (a finite probe cannot certify
    coercivity either way).
    """

    agent: int
    radius: float
    center_value: float
    min_shell_value: float

    @property
    def margin(self) -> float:
        return self.min_shell_value - self.center_value


def coercivity_probe(
    p: Problem,
    radius: float = 10.0,
    num_samples: int = 256,
    seed: int = 0,
) -> list[CoercivityProbe]:
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((num_samples, p.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    center = np.zeros(p.dim)
    probes = []
    for i, obj in enumerate(p.objectives):
        values = [float(obj.value(radius * d)) for d in directions]
        probes.append(
            CoercivityProbe(
                agent=i,
                radius=radius,
                center_value=float(obj.value(center)),
                min_shell_value=min(values),
            )
        )
    return probes


# ---------------------------------------------------------------------------
# rendering


def bound_report_table(reports: Sequence[BoundReport]) -> str:
    """Aligned text table of bound reports."""
    header = f"{'quantity':<55} {'measured':>14} {'bound':>14} {'slack':>14}  ok"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.quantity:<55} {r.measured:>14.6e} {r.bound:>14.6e} "
            f"{r.slack:>14.6e}  {'yes' if r.satisfied else 'NO'}"
        )
    caveats = {r.caveat for r in reports if r.caveat}
    for c in sorted(caveats):
        lines.append(f"note: {c}")
    return "\n".join(lines)


def bound_report_csv_rows(reports: Sequence[BoundReport]) -> list[list[str]]:
    rows = [["quantity", "measured", "bound", "slack", "satisfied"]]
    for r in reports:
        rows.append(
            [
                r.quantity,
                repr(r.measured),
                repr(r.bound),
                repr(r.slack),
                "true" if r.satisfied else "false",
            ]
        )
    return rows
