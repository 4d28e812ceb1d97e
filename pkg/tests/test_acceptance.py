"""Acceptance suite.

One test per acceptance criterion, each printing a PASS line with the
measured values (run ``pytest -s tests/test_acceptance.py`` to see them).
Tolerances are pinned here and nowhere else.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from dgdlab import (
    NoiseSpec,
    RandomStream,
    StationaryKind,
    broadcast_state,
    builtin_config,
    classify_stationary,
    consensus_distance_check,
    dgd_step,
    escape_compare,
    expected_descent_mc,
    f_hess,
    f_value,
    mean_curvature_check,
    mean_gradient_check,
    q_grad,
    q_hess_apply,
    q_hess_min_eig,
    q_value,
    run_experiment,
    sample,
    validate_mixing,
    with_lipschitz,
)
from dgdlab.config import config_from_dict
from dgdlab.dynamics import RunConfig, StopRule, run
from dgdlab.objective import fd_gradient
from dgdlab.problems import FIVE_AGENT_QUARTIC_EDGES, FIVE_AGENT_QUARTIC_MIXING
from dgdlab import NetworkGraph

from helpers import random_problem, random_state

SQ2H = math.sqrt(2.0) / 2.0


def test_acceptance_1_update_forms_agree():
    # dgd_step(x) == x - alpha * q_grad(x) on 100 random instances
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        p = random_problem(rng, m_max=6, n_max=4)
        alpha = float(rng.uniform(0.01, 0.5))
        x = random_state(rng, p)
        a = dgd_step(p, alpha, x)
        b = x - alpha * q_grad(p, alpha, x)
        rel = float(np.abs(a - b).max()) / max(1.0, float(np.abs(a).max()))
        worst = max(worst, rel)
    assert worst <= 1e-12
    print(f"\nACCEPTANCE 1: PASS - max relative gap {worst:.3e} over 100 instances")


def test_acceptance_2_benchmark_spectrum():
    graph = NetworkGraph(5, FIVE_AGENT_QUARTIC_EDGES)
    mixing = validate_mixing(FIVE_AGENT_QUARTIC_MIXING, graph)
    # analytic relabeled-cycle oracle: eigenvalues 0.6 + 0.4 cos(2 pi k / 5)
    oracle = sorted(0.6 + 0.4 * math.cos(2 * math.pi * k / 5) for k in range(5))
    lam2_oracle, lam_min_oracle = oracle[-2], oracle[0]
    assert abs(lam2_oracle - 0.7236068) <= 1e-6
    assert abs(lam_min_oracle - 0.2763932) <= 1e-6
    assert mixing.spectral.lambda_2 == pytest.approx(0.7236068, abs=1e-6)
    assert mixing.spectral.lambda_min == pytest.approx(0.2763932, abs=1e-6)
    print(
        f"\nACCEPTANCE 2: PASS - lambda_2 {mixing.spectral.lambda_2:.7f}, "
        f"lambda_min {mixing.spectral.lambda_min:.7f}"
    )


def test_acceptance_3_stationary_classification(five_agent):
    saddle = np.zeros(2)
    eig_saddle = float(np.linalg.eigvalsh(f_hess(five_agent, saddle))[0])
    cls_saddle = classify_stationary(0.0, eig_saddle)
    assert cls_saddle.kind is StationaryKind.SADDLE_OR_MAXIMIZER
    assert eig_saddle == pytest.approx(-2.0, abs=1e-9)
    for sign in (+1.0, -1.0):
        minimizer = np.array([sign * SQ2H, 0.0])
        eig_min = float(np.linalg.eigvalsh(f_hess(five_agent, minimizer))[0])
        assert classify_stationary(0.0, eig_min).kind is StationaryKind.LOCAL_MINIMIZER
        assert eig_min == pytest.approx(2.0, abs=1e-9)
        assert f_value(five_agent, minimizer) == pytest.approx(-0.25, abs=1e-12)
    print(
        f"\nACCEPTANCE 3: PASS - saddle min-eig {eig_saddle:.12f}, "
        f"minimizer min-eig 2, f(minimizer) {f_value(five_agent, np.array([SQ2H, 0.0])):.17g}"
    )


def test_acceptance_4_escape_comparison():
    cfg = builtin_config("paper-sec5")
    assert len(cfg.seeds) >= 20
    cmp = escape_compare(cfg)

    assert cmp.dgd_escape is not None
    assert 3000 <= cmp.dgd_escape <= 12000
    assert all(e is not None for e in cmp.ndgd_escapes)
    assert cmp.ndgd_median < cmp.dgd_escape
    assert cmp.fraction_earlier >= 0.8
    assert cmp.dgd_final_dist <= 0.05
    assert max(cmp.ndgd_final_dists) <= 0.05
    print(
        f"\nACCEPTANCE 4: PASS - DGD escape {cmp.dgd_escape}, NDGD median "
        f"{cmp.ndgd_median:g} over {len(cmp.ndgd_escapes)} seeds, "
        f"{cmp.fraction_earlier:.0%} earlier, final dists "
        f"{cmp.dgd_final_dist:.4f} / max {max(cmp.ndgd_final_dists):.4f}"
    )


def test_acceptance_5_bound_suite(five_agent):
    # constants valid over the box |x1|,|x2| <= 1 explored by the run
    problem = with_lipschitz(five_agent, lipschitz_grad=9.0, lipschitz_hess=12.0)
    cfg = RunConfig(
        problem=problem,
        alpha=0.005,
        max_iterations=50_000,
        init=np.array([1e-6, 1e-6]),
        record_every=1000,
        stop=StopRule(grad_norm_below=1e-9),
    )
    traj = run(cfg, "DGD")
    assert traj.stop_reason == "grad-norm"
    state = traj.final_state
    assert float(np.abs(state).max()) <= 1.0  # the constants' box holds
    reports = consensus_distance_check(problem, 0.005, state)
    reports.append(mean_gradient_check(problem, 0.005, state))
    reports.append(mean_curvature_check(problem, 0.005, state))
    assert all(r.satisfied for r in reports)
    print(
        f"\nACCEPTANCE 5: PASS - {len(reports)} bound reports satisfied at "
        f"iteration {traj.iterations_run} (min slack "
        f"{min(r.slack for r in reports):.3e})"
    )


def test_acceptance_6_derivative_oracles():
    rng = np.random.default_rng(606)
    # q_grad vs central differences of q_value over 50 random points
    worst_grad = 0.0
    for _ in range(10):
        p = random_problem(rng, m_max=5, n_max=3)
        alpha = float(rng.uniform(0.05, 0.5))
        for _ in range(5):
            x = random_state(rng, p)
            qg = q_grad(p, alpha, x)
            fd = fd_gradient(
                lambda flat: q_value(p, alpha, flat.reshape(p.num_agents, p.dim)),
                x.ravel(),
            )
            rel = float(np.linalg.norm(qg.ravel() - fd)) / max(
                1.0, float(np.linalg.norm(qg))
            )
            worst_grad = max(worst_grad, rel)
    assert worst_grad <= 1e-5

    # operator symmetry to 1e-10
    worst_sym = 0.0
    for _ in range(10):
        p = random_problem(rng, m_max=5, n_max=3)
        alpha = 0.1
        x = random_state(rng, p)
        v = rng.standard_normal((p.num_agents, p.dim))
        w = rng.standard_normal((p.num_agents, p.dim))
        lhs = float(v.ravel() @ q_hess_apply(p, alpha, x, w).ravel())
        rhs = float(w.ravel() @ q_hess_apply(p, alpha, x, v).ravel())
        worst_sym = max(worst_sym, abs(lhs - rhs) / max(1.0, abs(lhs)))
    assert worst_sym <= 1e-10

    # dense vs iterative minimum eigenvalue on 20 instances
    worst_eig = 0.0
    for _ in range(20):
        p = random_problem(rng, m_max=5, n_max=3)
        alpha = float(rng.uniform(0.05, 0.5))
        x = random_state(rng, p)
        dense = q_hess_min_eig(p, alpha, x, method="dense")
        iterative = q_hess_min_eig(p, alpha, x, method="iterative")
        worst_eig = max(worst_eig, abs(dense - iterative))
    assert worst_eig <= 1e-6
    print(
        f"\nACCEPTANCE 6: PASS - grad FD rel {worst_grad:.3e}, symmetry "
        f"{worst_sym:.3e}, dense-vs-iterative {worst_eig:.3e}"
    )


def test_acceptance_7_sphere_moments():
    spec = NoiseSpec.sphere(radius=0.2)
    stream = RandomStream(707, 0)
    n, num = 2, 100_000
    draws = np.stack([sample(spec, stream, n, k) for k in range(num)])
    norm_gap = float(np.abs(np.linalg.norm(draws, axis=1) - 0.2).max())
    assert norm_gap <= 1e-12
    target_var = 0.2**2 / n
    mean_sigmas, var_sigmas = [], []
    for j in range(n):
        col = draws[:, j]
        se_mean = col.std(ddof=1) / math.sqrt(num)
        assert abs(col.mean()) <= 4 * se_mean
        mean_sigmas.append(abs(col.mean()) / se_mean)
        sq = col**2
        se_var = sq.std(ddof=1) / math.sqrt(num)
        assert abs(sq.mean() - target_var) <= 4 * se_var
        var_sigmas.append(abs(sq.mean() - target_var) / se_var)
    print(
        f"\nACCEPTANCE 7: PASS - max norm gap {norm_gap:.2e}, mean within "
        f"{max(mean_sigmas):.2f} SE, variance within {max(var_sigmas):.2f} SE"
    )


def test_acceptance_8_one_step_descent(five_agent):
    state = broadcast_state(np.array([0.3, 0.3]), 5)
    spec = NoiseSpec.sphere(epsilon=1.0, safety_factor=0.5)
    grad_norm = float(np.linalg.norm(q_grad(five_agent, 0.005, state)))
    assert grad_norm >= 1.0  # epsilon hypothesis holds at this point
    est = expected_descent_mc(
        five_agent, 0.005, state, spec, num_samples=10_000, master_seed=808
    )
    assert est.mean_delta_q + 3 * est.std_err < 0
    print(
        f"\nACCEPTANCE 8: PASS - mean dQ {est.mean_delta_q:.6e} "
        f"(+3se {est.mean_delta_q + 3 * est.std_err:.6e}), stated bound "
        f"{est.bound:.6e}, ||q_grad|| {est.grad_norm:.4f}"
    )


def test_acceptance_9_determinism_and_locality(tmp_path):
    # byte-identical CSVs under identical seeds
    def cfg_for(out):
        return config_from_dict(
            {
                "builtin": "paper-sec5",
                "run": {"max_iterations": 2000, "record_every": 10},
                "experiment": {
                    "variants": ["DGD", "NDGD"],
                    "seeds": [0, 1],
                    "output_dir": str(out),
                },
            }
        )

    run_experiment(cfg_for(tmp_path / "a"))
    run_experiment(cfg_for(tmp_path / "b"))
    names = [
        "dgd_seed2024.csv",
        "dgd_seed2025.csv",
        "ndgd_seed2024.csv",
        "ndgd_seed2025.csv",
        "summary.csv",
    ]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (
            tmp_path / "b" / name
        ).read_bytes(), name

    # full-horizon audited noisy run: zero out-of-neighborhood reads
    cfg = builtin_config("paper-sec5")
    audited = run(
        RunConfig(
            problem=cfg.problem,
            alpha=cfg.alpha,
            max_iterations=cfg.max_iterations,
            init=cfg.init,
            noise=cfg.noise,
            master_seed=cfg.master_seed,
            record_every=10,
            references=cfg.references,
            audit=True,
        ),
        "NDGD",
    )
    assert audited.audit is not None
    assert audited.audit.out_of_neighborhood_reads == 0
    assert audited.audit.checked_iterations > 0
    assert audited.audit.max_step_equivalence_gap <= 1e-10
    print(
        f"\nACCEPTANCE 9: PASS - {len(names)} files byte-identical; audited "
        f"NDGD run ({audited.iterations_run} iterations): 0 out-of-neighborhood "
        f"reads, max form gap {audited.audit.max_step_equivalence_gap:.2e}"
    )
