from __future__ import annotations

import numpy as np
import pytest

from dgdlab import (
    NetworkGraph,
    NoiseSpec,
    Problem,
    RunConfig,
    StopRule,
    agent_streams,
    broadcast_state,
    dgd_step,
    ndgd_step,
    polynomial_objective,
    q_grad,
    run,
    validate_mixing,
)
from dgdlab.dynamics import (
    STOP_CONSENSUS,
    STOP_DIVERGED,
    STOP_GRAD_NORM,
    STOP_MAX_ITERATIONS,
)
from dgdlab.mixing import MixingMatrix

from helpers import random_problem, random_state


def _quadratic_problem(rng):
    """Three agents with quadratic objectives a_i (x - c_i)^2 componentwise."""
    g = NetworkGraph(3, [(0, 1), (1, 2)])
    from dgdlab import generate_mixing

    mixing = validate_mixing(generate_mixing(g, beta=0.3), g)
    objectives = []
    for _ in range(3):
        a = float(rng.uniform(0.5, 2.0))
        c = rng.uniform(-1, 1, size=2)
        terms = [
            ((2, 0), a),
            ((1, 0), -2 * a * c[0]),
            ((0, 2), a),
            ((0, 1), -2 * a * c[1]),
        ]
        objectives.append(polynomial_objective(terms, dim=2, lipschitz_grad=2 * a))
    return Problem(objectives=tuple(objectives), graph=g, mixing=mixing)


def test_single_agent_reduction_is_plain_gradient_descent():
    g = NetworkGraph(1)
    p = Problem(
        objectives=(polynomial_objective([((2,), 1.0)], dim=1),),
        graph=g,
        mixing=validate_mixing([[1.0]], g),
    )
    out = dgd_step(p, 0.1, np.array([[1.0]]))
    assert out[0, 0] == pytest.approx(0.8, rel=1e-15)


def test_exact_fixed_point_is_invariant():
    rng = np.random.default_rng(0)
    p = _quadratic_problem(rng)
    # solve (blockdiag(H_i) + (I - W kron I)/alpha) x = -g0 for the point
    # with vanishing penalized gradient, where grad_i(x) = H_i x + b_i
    alpha = 0.1
    m, n = 3, 2
    h_blocks = [obj.hessian(np.zeros(n)) for obj in p.objectives]
    b = np.concatenate([obj.gradient(np.zeros(n)) for obj in p.objectives])
    big = np.zeros((m * n, m * n))
    for i, h in enumerate(h_blocks):
        big[i * n : (i + 1) * n, i * n : (i + 1) * n] = h
    big += (np.eye(m * n) - np.kron(p.mixing.entries, np.eye(n))) / alpha
    fixed = np.linalg.solve(big, -b).reshape(m, n)
    assert np.linalg.norm(q_grad(p, alpha, fixed)) <= 1e-10
    stepped = dgd_step(p, alpha, fixed)
    assert np.abs(stepped - fixed).max() <= 1e-12


def test_dgd_step_equals_penalized_gradient_step():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = random_problem(rng)
        alpha = float(rng.uniform(0.01, 0.5))
        x = random_state(rng, p)
        a = dgd_step(p, alpha, x)
        b = x - alpha * q_grad(p, alpha, x)
        scale = max(1.0, float(np.abs(a).max()))
        assert np.abs(a - b).max() <= 1e-12 * scale


def test_ndgd_with_no_noise_is_bitwise_dgd(five_agent):
    x = broadcast_state(np.array([0.1, -0.2]), 5)
    streams = agent_streams(0, 5)
    a = ndgd_step(five_agent, 0.005, x, NoiseSpec.none(), streams, 0)
    b = dgd_step(five_agent, 0.005, x)
    assert np.array_equal(a, b)


def test_ndgd_seed_reproducibility(five_agent):
    spec = NoiseSpec.sphere(radius=0.1)
    x = broadcast_state(np.array([0.1, -0.2]), 5)
    a = ndgd_step(five_agent, 0.005, x, spec, agent_streams(42, 5), 3)
    b = ndgd_step(five_agent, 0.005, x, spec, agent_streams(42, 5), 3)
    assert np.array_equal(a, b)
    c = ndgd_step(five_agent, 0.005, x, spec, agent_streams(43, 5), 3)
    assert not np.array_equal(a, c)


def test_ndgd_expectation_matches_dgd(five_agent):
    # zero-mean noise: averaging the noisy step over draws recovers the
    # deterministic step within Monte-Carlo error alpha*r/sqrt(N*n)
    alpha, r, num = 0.005, 0.2, 10_000
    spec = NoiseSpec.sphere(radius=r)
    x = broadcast_state(np.array([0.3, 0.3]), 5)
    streams = agent_streams(11, 5)
    acc = np.zeros((5, 2))
    for k in range(num):
        acc += ndgd_step(five_agent, alpha, x, spec, streams, k)
    mean_step = acc / num
    det = dgd_step(five_agent, alpha, x)
    mc_err = alpha * r / np.sqrt(num * 2)
    assert np.abs(mean_step - det).max() <= 4 * mc_err


def test_run_rejects_bad_horizon(five_agent):
    with pytest.raises(ValueError):
        RunConfig(
            problem=five_agent,
            alpha=0.005,
            max_iterations=0,
            init=np.array([0.0, 0.0]),
        )


def test_run_single_iteration_matches_stepper(five_agent):
    init = np.array([0.25, -0.5])
    cfg = RunConfig(
        problem=five_agent, alpha=0.005, max_iterations=1, init=init
    )
    traj = run(cfg, "DGD")
    expected = dgd_step(five_agent, 0.005, broadcast_state(init, 5))
    assert np.allclose(traj.final_state, expected, atol=0)
    assert traj.iterations_run == 1
    assert traj.stop_reason == STOP_MAX_ITERATIONS
    assert [r.iteration for r in traj.records] == [0, 1]


def test_dgd_and_gd_on_q_produce_same_iterates(five_agent):
    cfg = RunConfig(
        problem=five_agent,
        alpha=0.005,
        max_iterations=500,
        init=np.array([0.3, 0.2]),
        record_every=50,
    )
    a = run(cfg, "DGD")
    b = run(cfg, "GD_on_Q")
    for ra, rb in zip(a.records, b.records):
        assert ra.iteration == rb.iteration
        assert ra.q_value == pytest.approx(rb.q_value, rel=1e-10, abs=1e-12)
    scale = max(1.0, float(np.abs(a.final_state).max()))
    assert np.abs(a.final_state - b.final_state).max() <= 1e-10 * scale


def test_monotone_descent_below_smoothness_cap():
    rng = np.random.default_rng(2)
    p = _quadratic_problem(rng)
    from dgdlab import lipschitz_aggregate

    alpha = 0.05
    constants = lipschitz_aggregate(p, alpha)
    assert constants.l_q_grad is not None and alpha <= 1.0 / constants.l_q_grad
    cfg = RunConfig(
        problem=p,
        alpha=alpha,
        max_iterations=300,
        init=rng.uniform(-1, 1, size=(3, 2)),
        record_every=1,
    )
    traj = run(cfg, "DGD")
    values = [r.q_value for r in traj.records]
    for prev, cur in zip(values, values[1:]):
        assert cur <= prev + 1e-10


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_divergence_guard():
    g = NetworkGraph(1)
    p = Problem(
        objectives=(polynomial_objective([((4,), 1.0)], dim=1),),
        graph=g,
        mixing=validate_mixing([[1.0]], g),
    )
    cfg = RunConfig(
        problem=p, alpha=10.0, max_iterations=10_000, init=np.array([2.0])
    )
    traj = run(cfg, "DGD")
    assert traj.stop_reason == STOP_DIVERGED
    assert traj.iterations_run < 10_000
    assert all(np.isfinite(r.q_value) for r in traj.records)
    assert np.all(np.isfinite(traj.final_state))


def test_grad_norm_stop_rule(five_agent):
    cfg = RunConfig(
        problem=five_agent,
        alpha=0.005,
        max_iterations=50_000,
        init=np.array([0.5, 0.1]),
        stop=StopRule(grad_norm_below=1e-6),
        record_every=1000,
    )
    traj = run(cfg, "DGD")
    assert traj.stop_reason == STOP_GRAD_NORM
    assert np.linalg.norm(q_grad(five_agent, 0.005, traj.final_state)) <= 1e-6
    # stopping iteration appears as the final record
    assert traj.records[-1].iteration == traj.iterations_run


def test_consensus_stop_rule():
    rng = np.random.default_rng(3)
    p = _quadratic_problem(rng)
    cfg = RunConfig(
        problem=p,
        alpha=0.05,
        max_iterations=100_000,
        init=np.zeros(2),
        stop=StopRule(consensus_below=1e16, f_grad_norm_below=1e16),
    )
    traj = run(cfg, "DGD")
    assert traj.stop_reason == STOP_CONSENSUS
    assert traj.iterations_run == 0  # thresholds are vacuous


def test_stop_rule_pair_validation():
    with pytest.raises(ValueError):
        StopRule(consensus_below=1e-6)
    with pytest.raises(ValueError):
        StopRule()


def test_audit_clean_run(five_agent):
    cfg = RunConfig(
        problem=five_agent,
        alpha=0.005,
        max_iterations=200,
        init=np.array([0.1, 0.1]),
        noise=NoiseSpec.sphere(radius=0.05),
        master_seed=4,
        record_every=10,
        audit=True,
    )
    traj = run(cfg, "NDGD")
    assert traj.audit is not None
    assert traj.audit.out_of_neighborhood_reads == 0
    assert traj.audit.checked_iterations > 0
    assert traj.audit.max_step_equivalence_gap <= 1e-12


def test_audit_detects_out_of_neighborhood_weight(five_agent):
    # doctor the mixing matrix so agent 0 reads a non-neighbor block;
    # bypass validation on purpose
    w = five_agent.mixing.entries.copy()
    w[0, 1] = w[1, 0] = 1e-3
    w[0, 0] -= 1e-3
    w[1, 1] -= 1e-3
    doctored = MixingMatrix(m=5, entries=w, spectral=five_agent.mixing.spectral)
    p = Problem(
        objectives=five_agent.objectives,
        graph=five_agent.graph,
        mixing=doctored,
        validate_gradients=False,
    )
    cfg = RunConfig(
        problem=p,
        alpha=0.005,
        max_iterations=3,
        init=np.array([0.1, 0.1]),
        audit=True,
    )
    traj = run(cfg, "DGD")
    assert traj.audit.out_of_neighborhood_reads > 0
    assert (0, 0, 1) in traj.audit.violations


def test_audited_run_matches_unaudited(five_agent):
    base = dict(
        problem=five_agent,
        alpha=0.005,
        max_iterations=100,
        init=np.array([0.2, -0.1]),
        noise=NoiseSpec.sphere(radius=0.05),
        master_seed=9,
    )
    plain = run(RunConfig(**base), "NDGD")
    audited = run(RunConfig(**base, audit=True), "NDGD")
    assert np.allclose(plain.final_state, audited.final_state, atol=1e-12)


def test_benchmark_run_reaches_a_minimizer(five_agent):
    refs = (np.array([np.sqrt(2) / 2, 0.0]), np.array([-np.sqrt(2) / 2, 0.0]))
    cfg = RunConfig(
        problem=five_agent,
        alpha=0.005,
        max_iterations=20_000,
        init=np.array([1e-6, 1e-6]),
        record_every=10,
        references=refs,
    )
    traj = run(cfg, "DGD")
    mean = traj.final_state.mean(axis=0)
    assert min(np.linalg.norm(mean - r) for r in refs) <= 0.05
    assert traj.records[-1].dist_to_ref <= 0.05
