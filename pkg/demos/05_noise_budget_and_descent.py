"""The perturbation budget and what it buys.

Perturbations must be i.i.d. and zero mean with per-coordinate variance
at most lambda_min(W) * epsilon^2 / (m n), where epsilon is the gradient
threshold that splits "large gradient" from "near stationarity". Uniform
sphere sampling realizes exactly (r^2 / n) I as covariance and keeps
every draw bounded, so it is the default carrier.

While the gradient is large, the expected one-step change of the
penalized objective is strictly negative despite the injected noise;
the Monte-Carlo check below estimates it directly.
"""

import numpy as np

from dgdlab import (
    NoiseSpec,
    RandomStream,
    broadcast_state,
    expected_descent_mc,
    five_agent_quartic,
    q_grad,
    sample,
    sigma_max_sq,
    sphere_radius_for,
)

problem = five_agent_quartic()
m, n = problem.num_agents, problem.dim
lam_min = problem.mixing.spectral.lambda_min
epsilon = 1.0

budget = sigma_max_sq(epsilon, m, n, lam_min)
print(f"variance budget at epsilon={epsilon}: {budget:.8f} per coordinate")
for safety in (1.0, 0.5, 0.25):
    r = sphere_radius_for(epsilon, m, n, lam_min, safety_factor=safety)
    print(f"  safety {safety:>4}: sphere radius {r:.5f}, variance {r**2 / n:.8f}")

# --- sphere sampler moments ------------------------------------------------
spec = NoiseSpec.sphere(radius=0.2)
stream = RandomStream(master_seed=7, agent_index=0)
draws = np.stack([sample(spec, stream, n, k) for k in range(20_000)])
print(
    f"\n20k sphere draws (r=0.2): |norm - r| max "
    f"{np.abs(np.linalg.norm(draws, axis=1) - 0.2).max():.2e}, "
    f"mean {np.round(draws.mean(axis=0), 5)}, "
    f"per-coordinate variance {np.round(draws.var(axis=0), 5)} "
    f"(target {0.2**2 / n})"
)

# --- expected one-step descent under the budget ----------------------------
state = broadcast_state(np.array([0.3, 0.3]), m)
grad_norm = float(np.linalg.norm(q_grad(problem, 0.005, state)))
print(f"\nat broadcast (0.3, 0.3): ||q_grad|| = {grad_norm:.4f} >= epsilon")
est = expected_descent_mc(
    problem,
    alpha=0.005,
    stacked=state,
    noise_spec=NoiseSpec.sphere(epsilon=epsilon, safety_factor=0.5),
    num_samples=5000,
    master_seed=1,
)
print(
    f"mean one-step dQ over {est.num_samples} draws: {est.mean_delta_q:.6e} "
    f"(std err {est.std_err:.1e})"
)
print(f"stated expected-descent bound: {est.bound:.6e}")
print("the descent argument needs variance at or below half the budget,")
print("hence the default safety factor of 0.5.")

# deterministic limit: with the noise turned off the estimate is exact
det = expected_descent_mc(problem, 0.005, state, NoiseSpec.none(), 1)
print(f"\nnoise-free one-step dQ (exact): {det.mean_delta_q:.6e}")
