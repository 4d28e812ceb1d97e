"""Objective hierarchy: per-agent objectives, the stacked sum, and the
consensus-penalized objective Q.

For a problem with agents ``1..m`` over a mixing matrix ``W``, the stacked
objective is ``F(x) = sum_i f_i(x_i)`` where ``x_i`` is agent ``i``'s block,
and the penalized objective with step size ``alpha`` is

    Q(x) = F(x) + (1 / (2 alpha)) * x^T (I - W kron I_n) x.

Plain gradient descent on Q with step ``alpha`` reproduces the distributed
update exactly, which is what makes Q the natural object for convergence
diagnostics: its stationary points are the fixed points of the distributed
iteration, and its Hessian ``blockdiag(hess f_i) + (I - W kron I_n)/alpha``
classifies them.
"""

from __future__ import annotations

import enum
from dataclasses import InitVar, dataclass
from typing import Callable, Sequence

import numpy as np

from .graph import NetworkGraph, is_connected
from .mixing import MixingMatrix, apply_lifted

#: central-difference step scale, cube root of machine epsilon
_FD_SCALE = float(np.finfo(float).eps) ** (1.0 / 3.0)

#: relative tolerance for analytic-vs-finite-difference gradient probes
GRADIENT_PROBE_RTOL = 1e-5


def _fd_steps(x: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.abs(x)) * _FD_SCALE


def fd_gradient(func: Callable[[np.ndarray], float], x: np.ndarray) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = _fd_steps(x)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        g[j] = (func(x + e) - func(x - e)) / (2.0 * h[j])
    return g


def fd_jacobian(
    func: Callable[[np.ndarray], np.ndarray], x: np.ndarray
) -> np.ndarray:
    """Central finite-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    h = _fd_steps(x)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        cols.append((func(x + e) - func(x - e)) / (2.0 * h[j]))
    return np.stack(cols, axis=-1)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


@dataclass
class LocalObjective:
    """One agent's objective: value with optional analytic derivatives.

    Missing derivatives fall back to central finite differences (of the
    value for the gradient, of the gradient for the Hessian). Hessians
    are symmetrized after evaluation. ``lipschitz_grad`` and
    ``lipschitz_hess`` are optional metadata used by the bound
    evaluators; leaving them unset marks them unavailable rather than
    assuming a default.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz_grad: float | None = None
    lipschitz_hess: float | None = None

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return fd_gradient(self.value, x)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return symmetrize(np.asarray(self.hess(x), dtype=float))
        return symmetrize(fd_jacobian(self.gradient, x))


def polynomial_objective(
    terms: Sequence[tuple[Sequence[int], float]],
    dim: int,
    lipschitz_grad: float | None = None,
    lipschitz_hess: float | None = None,
) -> LocalObjective:
    """Build a polynomial objective from monomial terms.

    Each term is a pair ``(powers, coeff)`` where ``powers`` has one
    nonnegative integer exponent per coordinate. Gradient and Hessian
    callbacks come from term-wise differentiation, so they are exact;
    the differentiated monomial tables are precomputed once because
    these callbacks sit in the simulation hot loop.
    """
    powers = np.array([list(p) for p, _ in terms], dtype=np.int64)
    coeffs = np.array([float(c) for _, c in terms], dtype=float)
    if terms and powers.shape[1] != dim:
        raise ValueError(
            f"terms have {powers.shape[1]} exponents but dim is {dim}"
        )
    if terms and np.any(powers < 0):
        raise ValueError("monomial exponents must be nonnegative")
    if not terms:
        powers = np.zeros((0, dim), dtype=np.int64)
        coeffs = np.zeros(0)

    # flattened tables: monomial exponent rows plus a matrix scattering
    # each differentiated term's coefficient into its output slot
    def _pack(rows, out_dim):
        if not rows:
            return np.zeros((0, dim), dtype=np.int64), np.zeros((out_dim, 0))
        exps = np.array([r[1] for r in rows], dtype=np.int64)
        scatter = np.zeros((out_dim, len(rows)))
        for col, (slot, _, coeff) in enumerate(rows):
            scatter[slot, col] = coeff
        return exps, scatter

    grad_rows = []
    for t in range(len(coeffs)):
        for j in range(dim):
            if powers[t, j] > 0:
                e = powers[t].copy()
                e[j] -= 1
                grad_rows.append((j, e, coeffs[t] * powers[t, j]))
    grad_exps, grad_scatter = _pack(grad_rows, dim)

    hess_rows = []
    for t in range(len(coeffs)):
        for j in range(dim):
            for k in range(dim):
                pj, pk = powers[t, j], powers[t, k]
                if j == k:
                    if pj < 2:
                        continue
                    c = coeffs[t] * pj * (pj - 1)
                    e = powers[t].copy()
                    e[j] -= 2
                else:
                    if pj < 1 or pk < 1:
                        continue
                    c = coeffs[t] * pj * pk
                    e = powers[t].copy()
                    e[j] -= 1
                    e[k] -= 1
                hess_rows.append((j * dim + k, e, c))
    hess_exps, hess_scatter = _pack(hess_rows, dim * dim)

    def value(x) -> float:
        if not coeffs.size:
            return 0.0
        return float(coeffs @ np.prod(np.asarray(x, dtype=float) ** powers, axis=1))

    def grad(x) -> np.ndarray:
        if not grad_exps.size:
            return np.zeros(dim)
        return grad_scatter @ np.prod(np.asarray(x, dtype=float) ** grad_exps, axis=1)

    def hess(x) -> np.ndarray:
        if not hess_exps.size:
            return np.zeros((dim, dim))
        flat = hess_scatter @ np.prod(np.asarray(x, dtype=float) ** hess_exps, axis=1)
        return flat.reshape(dim, dim)

    return LocalObjective(
        dim=dim,
        value=value,
        grad=grad,
        hess=hess,
        lipschitz_grad=lipschitz_grad,
        lipschitz_hess=lipschitz_hess,
    )


@dataclass(frozen=True)
class Problem:
    """Immutable bundle of per-agent objectives, graph, and mixing matrix.

    Construction validates cross-consistency (agent counts, shared
    dimension, graph connectivity) and probes each analytic gradient
    against central finite differences on a small deterministic point
    set. Pass ``validate_gradients=False`` to skip the probe for
    expensive callbacks.
    """

    objectives: tuple[LocalObjective, ...]
    graph: NetworkGraph
    mixing: MixingMatrix
    validate_gradients: InitVar[bool] = True

    def __post_init__(self, validate_gradients: bool):
        if len(self.objectives) != self.graph.num_agents:
            raise ValueError(
                f"{len(self.objectives)} objectives for "
                f"{self.graph.num_agents} agents"
            )
        if self.mixing.m != self.graph.num_agents:
            raise ValueError(
                f"mixing matrix is {self.mixing.m}x{self.mixing.m} for "
                f"{self.graph.num_agents} agents"
            )
        dims = {obj.dim for obj in self.objectives}
        if len(dims) != 1:
            raise ValueError(f"objectives disagree on dimension: {sorted(dims)}")
        if not is_connected(self.graph):
            raise ValueError("communication graph must be connected")
        if validate_gradients:
            self._probe_gradients()

    def _probe_gradients(self):
        rng = np.random.default_rng(20240117)
        points = rng.uniform(-1.0, 1.0, size=(3, self.dim))
        for idx, obj in enumerate(self.objectives):
            if obj.grad is None:
                continue
            for x in points:
                ga = np.asarray(obj.grad(x), dtype=float)
                gf = fd_gradient(obj.value, x)
                scale = max(
                    1.0, float(np.linalg.norm(ga)), float(np.linalg.norm(gf))
                )
                if np.linalg.norm(ga - gf) > GRADIENT_PROBE_RTOL * scale:
                    raise ValueError(
                        f"analytic gradient of objective {idx + 1} disagrees "
                        f"with finite differences at probe point {x}"
                    )

    @property
    def num_agents(self) -> int:
        return self.graph.num_agents

    @property
    def dim(self) -> int:
        return self.objectives[0].dim


def broadcast_state(x: np.ndarray, m: int) -> np.ndarray:
    """Stacked state with every agent at the same point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("broadcast point must be a vector")
    return np.tile(x, (m, 1))


def as_state(arr, m: int, n: int) -> np.ndarray:
    """Coerce flat or block storage to an ``(m, n)`` stacked state."""
    arr = np.asarray(arr, dtype=float)
    if arr.size != m * n:
        raise ValueError(f"state has {arr.size} entries, expected {m}*{n}")
    return arr.reshape(m, n)


# ---------------------------------------------------------------------------
# global objective f = sum_i f_i, all agents evaluated at the same point


def f_value(p: Problem, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(sum(obj.value(x) for obj in p.objectives))


def f_grad(p: Problem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros(p.dim)
    for obj in p.objectives:
        g += obj.gradient(x)
    return g


def f_hess(p: Problem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = np.zeros((p.dim, p.dim))
    for obj in p.objectives:
        h += obj.hessian(x)
    return h


# ---------------------------------------------------------------------------
# stacked objective F, one block per agent


def F_value(p: Problem, stacked: np.ndarray) -> float:
    stacked = as_state(stacked, p.num_agents, p.dim)
    return float(
        sum(obj.value(stacked[i]) for i, obj in enumerate(p.objectives))
    )


def F_grad(p: Problem, stacked: np.ndarray) -> np.ndarray:
    """Blockwise gradient of F; block i is ``grad f_i`` at agent i's block."""
    stacked = as_state(stacked, p.num_agents, p.dim)
    return np.stack(
        [obj.gradient(stacked[i]) for i, obj in enumerate(p.objectives)]
    )


# ---------------------------------------------------------------------------
# penalized objective Q


def _check_alpha(alpha: float):
    if not alpha > 0:
        raise ValueError(f"step size alpha must be positive, got {alpha}")


def q_value(p: Problem, alpha: float, stacked: np.ndarray) -> float:
    """Value of Q: stacked objective plus the consensus penalty.

    The penalty ``x^T (I - W kron I_n) x / (2 alpha)`` vanishes exactly on
    consensus states and is nonnegative for a valid mixing matrix.
    """
    _check_alpha(alpha)
    stacked = as_state(stacked, p.num_agents, p.dim)
    mixed = apply_lifted(p.mixing, stacked)
    penalty = (float(np.sum(stacked * stacked)) - float(np.sum(stacked * mixed))) / (
        2.0 * alpha
    )
    return F_value(p, stacked) + penalty


def q_grad(p: Problem, alpha: float, stacked: np.ndarray) -> np.ndarray:
    """Gradient of Q: ``F_grad(x) + (x - (W kron I_n) x) / alpha``."""
    _check_alpha(alpha)
    stacked = as_state(stacked, p.num_agents, p.dim)
    return F_grad(p, stacked) + (stacked - apply_lifted(p.mixing, stacked)) / alpha


def q_hess_apply(
    p: Problem, alpha: float, stacked: np.ndarray, v: np.ndarray
) -> np.ndarray:
    """Apply the Q Hessian ``blockdiag(hess f_i) + (I - W kron I_n)/alpha`` to v."""
    _check_alpha(alpha)
    stacked = as_state(stacked, p.num_agents, p.dim)
    v = as_state(v, p.num_agents, p.dim)
    hv = np.stack(
        [obj.hessian(stacked[i]) @ v[i] for i, obj in enumerate(p.objectives)]
    )
    return hv + (v - apply_lifted(p.mixing, v)) / alpha


class PowerIterationError(RuntimeError):
    """Shifted power iteration failed to reach tolerance within the cap."""

    def __init__(self, iterations: int, residual: float, tol: float):
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(residual {residual:.3e}, tolerance {tol:.1e})"
        )
        self.iterations = iterations
        self.residual = residual
        self.tol = tol


#: dense eigensolves are used up to this many stacked coordinates
DENSE_EIG_CUTOVER = 400


def q_hess_dense(p: Problem, alpha: float, stacked: np.ndarray) -> np.ndarray:
    """Assemble the Q Hessian as a dense ``(m*n, m*n)`` symmetric matrix."""
    _check_alpha(alpha)
    stacked = as_state(stacked, p.num_agents, p.dim)
    m, n = p.num_agents, p.dim
    h = np.zeros((m * n, m * n))
    for i, obj in enumerate(p.objectives):
        h[i * n : (i + 1) * n, i * n : (i + 1) * n] = obj.hessian(stacked[i])
    h += (np.eye(m * n) - np.kron(p.mixing.entries, np.eye(n))) / alpha
    return symmetrize(h)


def _min_eig_power(
    apply_op: Callable[[np.ndarray], np.ndarray],
    size: int,
    tol: float,
    max_iterations: int,
    seed: int,
) -> float:
    """Minimum eigenvalue of a symmetric operator by shifted power iteration.

    First estimates the spectral radius (power iteration on the operator
    itself; the Rayleigh quotient plus residual is a certified upper
    bound), then runs power iteration on ``shift*I - H`` whose dominant
    eigenvalue is ``shift - lambda_min``. For a symmetric operator the
    Rayleigh residual bounds the eigenvalue error, so the stop rule is a
    certificate.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(size)
    v /= np.linalg.norm(v)
    rayleigh, residual = 0.0, np.inf
    for _ in range(200):
        hv = apply_op(v)
        rayleigh = float(v @ hv)
        residual = float(np.linalg.norm(hv - rayleigh * v))
        norm = float(np.linalg.norm(hv))
        if norm == 0.0:
            break
        v = hv / norm
    radius_ub = abs(rayleigh) + residual
    shift = radius_ub * (1.0 + 1e-2) + 1e-8

    v = rng.standard_normal(size)
    v /= np.linalg.norm(v)
    for iteration in range(1, max_iterations + 1):
        sv = shift * v - apply_op(v)
        rayleigh = float(v @ sv)
        residual = float(np.linalg.norm(sv - rayleigh * v))
        if residual <= tol * max(1.0, abs(rayleigh)):
            return shift - rayleigh
        norm = float(np.linalg.norm(sv))
        if norm == 0.0:
            # shift*I - H annihilates v: v is an exact eigenvector
            return shift - rayleigh
        v = sv / norm
    raise PowerIterationError(max_iterations, residual, tol)


def q_hess_min_eig(
    p: Problem,
    alpha: float,
    stacked: np.ndarray,
    method: str = "auto",
    tol: float = 1e-8,
    max_iterations: int = 200_000,
    seed: int = 0,
) -> float:
    """Minimum eigenvalue of the Q Hessian at ``stacked``.

    ``method`` is ``"dense"``, ``"iterative"``, or ``"auto"`` (dense up
    to ``DENSE_EIG_CUTOVER`` stacked coordinates, iterative beyond).

    Raises
    ------
    PowerIterationError
        When the iterative method hits ``max_iterations`` before
        reaching ``tol``; never silently returns a bad estimate.
    """
    _check_alpha(alpha)
    stacked = as_state(stacked, p.num_agents, p.dim)
    size = p.num_agents * p.dim
    if method == "auto":
        method = "dense" if size <= DENSE_EIG_CUTOVER else "iterative"
    if method == "dense":
        return float(np.linalg.eigvalsh(q_hess_dense(p, alpha, stacked))[0])
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")

    hessians = [obj.hessian(stacked[i]) for i, obj in enumerate(p.objectives)]
    w = p.mixing

    def apply_op(v: np.ndarray) -> np.ndarray:
        blocks = v.reshape(p.num_agents, p.dim)
        hv = np.stack([hessians[i] @ blocks[i] for i in range(p.num_agents)])
        hv += (blocks - apply_lifted(w, blocks)) / alpha
        return hv.ravel()

    return _min_eig_power(apply_op, size, tol, max_iterations, seed)


# ---------------------------------------------------------------------------
# stationary-point taxonomy


class StationaryKind(enum.Enum):
    NOT_STATIONARY = "not-stationary"
    LOCAL_MINIMIZER = "local-minimizer"
    SADDLE_OR_MAXIMIZER = "saddle-or-maximizer"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class ToleranceSpec:
    grad_tol: float = 1e-6
    eig_tol: float = 1e-6

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.eig_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class StationaryClass:
    kind: StationaryKind
    grad_norm: float
    min_hess_eig: float


def classify_stationary(
    grad_norm: float,
    min_hess_eig: float,
    tol: ToleranceSpec = ToleranceSpec(),
) -> StationaryClass:
    """Classify a point from its gradient norm and minimum Hessian eigenvalue.

    A point is stationary when the gradient norm is within ``grad_tol``;
    a stationary point is a local minimizer when the minimum eigenvalue
    clears ``eig_tol``, a saddle or maximizer when it falls below
    ``-eig_tol``, and degenerate in the remaining band, which only
    numerics should produce for well-posed objectives.
    """
    if grad_norm > tol.grad_tol:
        kind = StationaryKind.NOT_STATIONARY
    elif min_hess_eig > tol.eig_tol:
        kind = StationaryKind.LOCAL_MINIMIZER
    elif min_hess_eig < -tol.eig_tol:
        kind = StationaryKind.SADDLE_OR_MAXIMIZER
    else:
        kind = StationaryKind.DEGENERATE
    return StationaryClass(
        kind=kind, grad_norm=float(grad_norm), min_hess_eig=float(min_hess_eig)
    )


# ---------------------------------------------------------------------------
# Lipschitz bookkeeping


@dataclass(frozen=True)
class LipschitzConstants:
    """Aggregate smoothness constants; ``None`` marks unavailable metadata.

    For gradients, the stacked objective inherits ``max_i L_i`` and the
    penalized objective adds ``(1 - lambda_min(W)) / alpha``. The penalty
    is quadratic, so Q's Hessian constant equals F's.
    """

    l_f_grad: float | None
    l_f_hess: float | None
    l_q_grad: float | None
    l_q_hess: float | None


def lipschitz_aggregate(p: Problem, alpha: float) -> LipschitzConstants:
    _check_alpha(alpha)
    grads = [obj.lipschitz_grad for obj in p.objectives]
    hesses = [obj.lipschitz_hess for obj in p.objectives]
    l_f_grad = max(grads) if all(v is not None for v in grads) else None
    l_f_hess = max(hesses) if all(v is not None for v in hesses) else None
    l_q_grad = None
    if l_f_grad is not None:
        l_q_grad = l_f_grad + (1.0 - p.mixing.spectral.lambda_min) / alpha
    return LipschitzConstants(
        l_f_grad=l_f_grad,
        l_f_hess=l_f_hess,
        l_q_grad=l_q_grad,
        l_q_hess=l_f_hess,
    )


def with_lipschitz(
    p: Problem, lipschitz_grad: float | None, lipschitz_hess: float | None
) -> Problem:
    """Copy of the problem with uniform Lipschitz metadata on every agent.

    Intended for attaching constants that are valid over the region a
    run actually explores (global constants do not exist for, e.g.,
    quartic objectives).
    """
    objectives = tuple(
        LocalObjective(
            dim=obj.dim,
            value=obj.value,
            grad=obj.grad,
            hess=obj.hess,
            lipschitz_grad=lipschitz_grad,
            lipschitz_hess=lipschitz_hess,
        )
        for obj in p.objectives
    )
    return Problem(
        objectives=objectives,
        graph=p.graph,
        mixing=p.mixing,
        validate_gradients=False,
    )
