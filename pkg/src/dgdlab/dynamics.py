"""Synchronous-round simulation of the distributed updates.

Three variants share one engine:

* ``DGD``: each agent averages its neighbors' blocks with its mixing-row
  weights and takes a local gradient step.
* ``NDGD``: the same update with a fresh zero-mean perturbation added to
  each agent's gradient every round.
* ``GD_on_Q``: plain gradient descent on the penalized objective Q; it
  produces the same iterates as DGD up to floating-point rearrangement
  and exists as an independent computational path for equivalence checks.

All agents read round-k state and then write round-(k+1) state (double
buffering); no agent ever observes a mixed round. In audit mode the
engine routes every agent update through a read-tracked view of the
state and records any block read outside the agent's closed
neighborhood, and it cross-checks the two update forms at every recorded
iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import neighbors
from .mixing import apply_lifted, consensus_average
from .noise import NoiseSpec, RandomStream, agent_streams, sample
from .objective import F_grad, F_value, Problem, as_state, broadcast_state

VARIANTS = ("DGD", "NDGD", "GD_on_Q")

STOP_MAX_ITERATIONS = "max-iterations"
STOP_GRAD_NORM = "grad-norm"
STOP_CONSENSUS = "consensus-and-f-grad"
STOP_DIVERGED = "diverged"


@dataclass(frozen=True)
class StopRule:
    """Early-stop criteria checked at every iteration.

    ``grad_norm_below`` triggers on the Q gradient norm.
    ``consensus_below`` and ``f_grad_norm_below`` form a pair: both must
    hold simultaneously (consensus error and the gradient of the global
    objective at the consensus average).
    """

    grad_norm_below: float | None = None
    consensus_below: float | None = None
    f_grad_norm_below: float | None = None

    def __post_init__(self):
        pair = (self.consensus_below is None) == (self.f_grad_norm_below is None)
        if not pair:
            raise ValueError(
                "consensus_below and f_grad_norm_below must be set together"
            )
        if self.grad_norm_below is None and self.consensus_below is None:
            raise ValueError("stop rule must set at least one criterion")


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulation run needs.

    ``init`` is either a length-n vector broadcast to all agents or a
    full ``(m, n)`` stacked state. ``record_every`` defaults to 1 for
    horizons up to 10_000 iterations and 10 beyond (the final state is
    always recorded). ``references`` are points distances are reported
    against (known minimizers, say).
    """

    problem: Problem
    alpha: float
    max_iterations: int
    init: np.ndarray
    noise: NoiseSpec = NoiseSpec.none()
    master_seed: int = 0
    record_every: int | None = None
    stop: StopRule | None = None
    references: tuple[np.ndarray, ...] = ()
    track_blocks: bool = False
    audit: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def initial_state(self) -> np.ndarray:
        init = np.asarray(self.init, dtype=float)
        if init.ndim == 1:
            return broadcast_state(init, self.problem.num_agents)
        return as_state(init, self.problem.num_agents, self.problem.dim)

    def effective_record_every(self) -> int:
        if self.record_every is not None:
            return self.record_every
        return 1 if self.max_iterations <= 10_000 else 10


@dataclass(frozen=True)
class TrajectoryRecord:
    """Telemetry for one recorded iteration."""

    iteration: int
    q_value: float
    q_grad_norm: float
    consensus_err: float
    f_of_mean: float
    mean: np.ndarray
    dist_to_ref: float
    agent_dists: np.ndarray | None
    blocks: np.ndarray | None


@dataclass
class AuditReport:
    """Locality and equivalence findings from an audited run."""

    out_of_neighborhood_reads: int = 0
    violations: list[tuple[int, int, int]] = field(default_factory=list)
    max_step_equivalence_gap: float = 0.0
    checked_iterations: int = 0

    _VIOLATION_CAP = 100

    def record_violation(self, iteration: int, agent: int, block: int):
        self.out_of_neighborhood_reads += 1
        if len(self.violations) < self._VIOLATION_CAP:
            self.violations.append((iteration, agent, block))


@dataclass
class Trajectory:
    records: list[TrajectoryRecord]
    final_state: np.ndarray
    iterations_run: int
    stop_reason: str
    variant: str
    audit: AuditReport | None = None


def _min_dist(x: np.ndarray, refs: Sequence[np.ndarray]) -> float:
    return min(float(np.linalg.norm(x - r)) for r in refs)


# ---------------------------------------------------------------------------
# steppers


def dgd_step(p: Problem, alpha: float, stacked: np.ndarray) -> np.ndarray:
    """One distributed gradient step: mix neighbor blocks, descend locally."""
    stacked = as_state(stacked, p.num_agents, p.dim)
    return apply_lifted(p.mixing, stacked) - alpha * F_grad(p, stacked)


def ndgd_step(
    p: Problem,
    alpha: float,
    stacked: np.ndarray,
    noise_spec: NoiseSpec,
    streams: Sequence[RandomStream],
    iteration: int,
) -> np.ndarray:
    """One noisy distributed step; each agent draws from its own stream."""
    stacked = as_state(stacked, p.num_agents, p.dim)
    xi = np.stack(
        [sample(noise_spec, streams[i], p.dim, iteration) for i in range(p.num_agents)]
    )
    return apply_lifted(p.mixing, stacked) - alpha * (F_grad(p, stacked) + xi)


class _TrackedState:
    """Read-tracked view of the round-k state used by audited updates."""

    def __init__(self, state: np.ndarray):
        self._state = state
        self.reads: set[int] = set()

    def block(self, j: int) -> np.ndarray:
        self.reads.add(j)
        return self._state[j]


def _audited_update(
    p: Problem,
    alpha: float,
    state: np.ndarray,
    xi: np.ndarray | None,
    iteration: int,
    report: AuditReport,
) -> np.ndarray:
    """Per-agent update reading only blocks with nonzero mixing weight.

    The read set of each agent must be contained in its closed
    neighborhood; anything else is recorded as a violation (it would mean
    the update uses information the network cannot deliver).
    """
    w = p.mixing.entries
    new = np.empty_like(state)
    for i in range(p.num_agents):
        tracked = _TrackedState(state)
        acc = np.zeros(p.dim)
        for j in np.nonzero(w[i])[0]:
            acc += w[i, j] * tracked.block(int(j))
        grad = p.objectives[i].gradient(tracked.block(i))
        if xi is not None:
            grad = grad + xi[i]
        new[i] = acc - alpha * grad
        allowed = set(neighbors(p.graph, i)) | {i}
        for j in sorted(tracked.reads - allowed):
            report.record_violation(iteration, i, j)
    return new


# ---------------------------------------------------------------------------
# engine


def _finite(state: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(state)))


def run(cfg: RunConfig, variant: str) -> Trajectory:
    """Iterate the chosen variant up to the horizon or a stop rule.

    Telemetry rows carry the iteration index, Q value, Q gradient norm,
    consensus error ``max_i ||x_i - mean||``, the global objective at the
    consensus average, the average itself, and distances to the
    reference points. A non-finite coordinate aborts the run with stop
    reason ``diverged`` instead of propagating NaNs into telemetry.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    p = cfg.problem
    noise_spec = cfg.noise
    if variant == "NDGD":
        noise_spec = noise_spec.resolved(
            p.num_agents, p.dim, p.mixing.spectral.lambda_min
        )
        streams = agent_streams(cfg.master_seed, p.num_agents)
    else:
        streams = []

    state = cfg.initial_state()
    every = cfg.effective_record_every()
    records: list[TrajectoryRecord] = []
    audit = AuditReport() if cfg.audit else None

    def snapshot(k: int, mixed: np.ndarray, qg_norm: float) -> bool:
        """Append a telemetry row; False when values overflow (divergence)."""
        mean = consensus_average(state)
        penalty = (
            float(np.sum(state * state)) - float(np.sum(state * mixed))
        ) / (2.0 * cfg.alpha)
        qv = F_value(p, state) + penalty
        consensus_err = float(np.linalg.norm(state - mean, axis=1).max())
        fom = float(sum(obj.value(mean) for obj in p.objectives))
        if not all(map(math.isfinite, (qv, qg_norm, consensus_err, fom))):
            return False
        if cfg.references:
            dist = _min_dist(mean, cfg.references)
            agent_dists = np.array(
                [_min_dist(state[i], cfg.references) for i in range(p.num_agents)]
            )
        else:
            dist, agent_dists = math.nan, None
        records.append(
            TrajectoryRecord(
                iteration=k,
                q_value=qv,
                q_grad_norm=qg_norm,
                consensus_err=consensus_err,
                f_of_mean=fom,
                mean=mean,
                dist_to_ref=dist,
                agent_dists=agent_dists,
                blocks=state.copy() if cfg.track_blocks else None,
            )
        )
        return True

    stop_reason = STOP_MAX_ITERATIONS
    iterations_run = cfg.max_iterations
    w = p.mixing.entries
    objectives = p.objectives
    m, n = p.num_agents, p.dim
    rule = cfg.stop
    # the penalized gradient is only needed for the GD variant, an active
    # gradient stop rule, or telemetry; skip it otherwise in the hot loop
    qg_every_step = variant == "GD_on_Q" or (
        rule is not None and rule.grad_norm_below is not None
    )
    k = 0
    while True:
        mixed = w @ state
        f_grads = np.empty((m, n))
        for i in range(m):
            f_grads[i] = objectives[i].gradient(state[i])

        recording = k % every == 0 or k == cfg.max_iterations
        qg = qg_norm = None
        if qg_every_step or recording or audit is not None:
            qg = f_grads + (state - mixed) / cfg.alpha
            qg_norm = math.sqrt(float(np.sum(qg * qg)))
            if not math.isfinite(qg_norm):
                stop_reason, iterations_run = STOP_DIVERGED, k
                break
        if recording and not snapshot(k, mixed, qg_norm):
            stop_reason, iterations_run = STOP_DIVERGED, k
            break

        if rule is not None:
            if rule.grad_norm_below is not None and qg_norm <= rule.grad_norm_below:
                stop_reason, iterations_run = STOP_GRAD_NORM, k
                break
            if rule.consensus_below is not None:
                mean = consensus_average(state)
                cerr = float(np.linalg.norm(state - mean, axis=1).max())
                fg = np.zeros(n)
                for obj in objectives:
                    fg += obj.gradient(mean)
                if (
                    cerr <= rule.consensus_below
                    and float(np.linalg.norm(fg)) <= rule.f_grad_norm_below
                ):
                    stop_reason, iterations_run = STOP_CONSENSUS, k
                    break
        if k == cfg.max_iterations:
            break

        xi = None
        if variant == "NDGD":
            xi = np.empty((m, n))
            for i in range(m):
                xi[i] = sample(noise_spec, streams[i], n, k)

        if audit is not None and variant in ("DGD", "NDGD"):
            new_state = _audited_update(p, cfg.alpha, state, xi, k, audit)
            if recording:
                # the mixed+descend form must equal the penalized-gradient form
                descent = qg if xi is None else qg + xi
                alt = state - cfg.alpha * descent
                gap = float(np.abs(new_state - alt).max())
                audit.max_step_equivalence_gap = max(
                    audit.max_step_equivalence_gap, gap
                )
                audit.checked_iterations += 1
        elif variant == "GD_on_Q":
            new_state = state - cfg.alpha * qg
        elif variant == "NDGD":
            new_state = mixed - cfg.alpha * (f_grads + xi)
        else:
            new_state = mixed - cfg.alpha * f_grads

        if not _finite(new_state):
            stop_reason, iterations_run = STOP_DIVERGED, k
            break
        state = new_state
        k += 1

    if records and records[-1].iteration != min(k, iterations_run):
        mixed = apply_lifted(p.mixing, state)
        f_grads = F_grad(p, state)
        qg = f_grads + (state - mixed) / cfg.alpha
        qg_norm = float(np.linalg.norm(qg))
        if _finite(f_grads) and math.isfinite(qg_norm):
            snapshot(min(k, iterations_run), mixed, qg_norm)

    return Trajectory(
        records=records,
        final_state=state,
        iterations_run=iterations_run,
        stop_reason=stop_reason,
        variant=variant,
        audit=audit,
    )
