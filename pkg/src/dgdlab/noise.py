"""Per-agent random perturbations with a per-coordinate variance budget.

The perturbation added to each agent's gradient must be i.i.d., zero
mean, and have per-coordinate variance at most
``lambda_min(W) * epsilon^2 / (m * n)``, where ``epsilon`` is the
gradient-norm threshold the run targets. Uniform sampling on a sphere of
radius ``r`` realizes covariance ``(r^2 / n) I``, so choosing
``r^2 <= n * sigma_max_sq`` stays inside the budget while keeping every
draw bounded by ``r``.

Streams are counter-based: the draw for (master seed, agent, iteration)
is a pure function of those three values, so trajectories are
reproducible under any execution schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

#: default down-scaling of the variance budget; the one-step descent
#: argument closes cleanly at half budget (see expected_descent_mc), so
#: stay there unless the caller asks otherwise
DEFAULT_SAFETY_FACTOR = 0.5

_SPHERE_RETRIES = 16


def sigma_max_sq(epsilon: float, m: int, n: int, lambda_min_w: float) -> float:
    """Per-coordinate variance budget ``lambda_min(W) * epsilon^2 / (m n)``."""
    if not (epsilon > 0 and m > 0 and n > 0 and lambda_min_w > 0):
        raise ValueError("all budget inputs must be positive")
    return lambda_min_w * epsilon**2 / (m * n)


def sphere_radius_for(
    epsilon: float,
    m: int,
    n: int,
    lambda_min_w: float,
    safety_factor: float = DEFAULT_SAFETY_FACTOR,
) -> float:
    """Sphere radius that meets the (safety-scaled) variance budget with equality.

    A uniform draw on the radius-``r`` sphere has per-coordinate variance
    ``r^2 / n``, so ``r = sqrt(safety * n * sigma_max_sq)``.
    """
    if not 0 < safety_factor <= 1:
        raise ValueError(f"safety_factor must be in (0, 1], got {safety_factor}")
    return float(
        np.sqrt(safety_factor * n * sigma_max_sq(epsilon, m, n, lambda_min_w))
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Perturbation description: ``none``, ``sphere(radius)``, or ``gaussian(sigma)``.

    When ``epsilon`` is set, the realized per-coordinate variance must
    stay within ``safety_factor`` times the budget; ``resolved`` fills in
    the radius or sigma from the budget when they are left unset, and
    verifies explicitly-set ones.
    """

    kind: str
    radius: float | None = None
    sigma: float | None = None
    epsilon: float | None = None
    safety_factor: float = DEFAULT_SAFETY_FACTOR

    def __post_init__(self):
        if self.kind not in ("none", "sphere", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0 < self.safety_factor <= 1:
            raise ValueError(
                f"safety_factor must be in (0, 1], got {self.safety_factor}"
            )
        if self.radius is not None and not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("gaussian sigma must be positive")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls(kind="none")

    @classmethod
    def sphere(
        cls,
        radius: float | None = None,
        epsilon: float | None = None,
        safety_factor: float = DEFAULT_SAFETY_FACTOR,
    ) -> "NoiseSpec":
        if radius is None and epsilon is None:
            raise ValueError("sphere noise needs a radius or an epsilon budget")
        return cls(
            kind="sphere", radius=radius, epsilon=epsilon, safety_factor=safety_factor
        )

    @classmethod
    def gaussian(
        cls,
        sigma: float | None = None,
        epsilon: float | None = None,
        safety_factor: float = DEFAULT_SAFETY_FACTOR,
    ) -> "NoiseSpec":
        if sigma is None and epsilon is None:
            raise ValueError("gaussian noise needs a sigma or an epsilon budget")
        return cls(
            kind="gaussian", sigma=sigma, epsilon=epsilon, safety_factor=safety_factor
        )

    def per_coordinate_variance(self, n: int) -> float:
        """Realized per-coordinate variance of one agent's draw."""
        if self.kind == "none":
            return 0.0
        if self.kind == "sphere":
            if self.radius is None:
                raise ValueError("sphere radius not resolved; call resolved() first")
            return self.radius**2 / n
        if self.sigma is None:
            raise ValueError("gaussian sigma not resolved; call resolved() first")
        return self.sigma**2

    def resolved(self, m: int, n: int, lambda_min_w: float) -> "NoiseSpec":
        """Fill radius/sigma from the epsilon budget and enforce it.

        Returns a spec whose radius (sphere) or sigma (gaussian) is
        concrete. Raises if an explicitly-set scale exceeds the
        safety-scaled budget.
        """
        if self.kind == "none":
            return self
        spec = self
        if spec.kind == "sphere" and spec.radius is None:
            spec = replace(
                spec,
                radius=sphere_radius_for(
                    spec.epsilon, m, n, lambda_min_w, spec.safety_factor
                ),
            )
        if spec.kind == "gaussian" and spec.sigma is None:
            budget = spec.safety_factor * sigma_max_sq(
                spec.epsilon, m, n, lambda_min_w
            )
            spec = replace(spec, sigma=float(np.sqrt(budget)))
        if spec.epsilon is not None:
            budget = spec.safety_factor * sigma_max_sq(
                spec.epsilon, m, n, lambda_min_w
            )
            realized = spec.per_coordinate_variance(n)
            if realized > budget * (1.0 + 1e-12):
                raise ValueError(
                    f"per-coordinate variance {realized!r} exceeds the "
                    f"safety-scaled budget {budget!r}"
                )
        return spec


@lru_cache(maxsize=4096)
def _stream_key(master_seed: int, agent_index: int):
    return np.random.SeedSequence((master_seed, agent_index)).generate_state(
        2, np.uint64
    )


@dataclass(frozen=True)
class RandomStream:
    """Counter-based random stream for one agent.

    The generator for iteration ``k`` is keyed by (master seed, agent)
    and positioned at counter ``k``; the same triple always yields the
    same draw, independently of how many draws other agents or
    iterations have made.
    """

    master_seed: int
    agent_index: int

    def generator(self, iteration: int) -> np.random.Generator:
        key = _stream_key(self.master_seed, self.agent_index)
        return np.random.Generator(
            np.random.Philox(key=key, counter=[0, 0, 0, iteration])
        )


def agent_streams(master_seed: int, m: int) -> list[RandomStream]:
    return [RandomStream(master_seed, i) for i in range(m)]


def sample(
    spec: NoiseSpec, stream: RandomStream, n: int, iteration: int
) -> np.ndarray:
    """One perturbation draw of dimension ``n`` for the given iteration.

    Sphere draws normalize an isotropic Gaussian vector and rescale to
    the radius, so their norm is exact; an all-zero Gaussian draw is
    redrawn (bounded retries).
    """
    if spec.kind == "none":
        return np.zeros(n)
    gen = stream.generator(iteration)
    if spec.kind == "gaussian":
        if spec.sigma is None:
            raise ValueError("gaussian sigma not resolved")
        return gen.normal(0.0, spec.sigma, size=n)
    if spec.radius is None:
        raise ValueError("sphere radius not resolved")
    for _ in range(_SPHERE_RETRIES):
        v = gen.standard_normal(n)
        norm = math.sqrt(float(v @ v))
        if norm > 0.0:
            return v * (spec.radius / norm)
    raise RuntimeError(
        f"degenerate all-zero draws {_SPHERE_RETRIES} times in a row"
    )
