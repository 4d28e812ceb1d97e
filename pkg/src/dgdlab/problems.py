"""Builtin problem library.

``paper-sec5`` is the bundled 5-agent benchmark: quartic local
objectives over a 5-cycle whose sum ``x1^4 - x1^2 + x2^4 + x2^2`` has a
saddle at the origin and two local minimizers at ``(+-sqrt(2)/2, 0)``.
The mixing matrix puts weight 0.6 on the diagonal and 0.2 on each cycle
neighbor, giving eigenvalues ``0.6 + 0.4 cos(2 pi k / 5)``.

The local objectives carry no Lipschitz metadata: quartics have no
global gradient-Lipschitz constant. Attach region-valid constants with
``objective.with_lipschitz`` when running the bound evaluators.
"""

from __future__ import annotations

import math
from typing import Callable

from .graph import NetworkGraph
from .mixing import validate_mixing
from .objective import Problem, polynomial_objective

FIVE_AGENT_QUARTIC = "paper-sec5"

#: the two local minimizers of the benchmark's global objective
FIVE_AGENT_QUARTIC_MINIMIZERS = (
    (math.sqrt(2.0) / 2.0, 0.0),
    (-math.sqrt(2.0) / 2.0, 0.0),
)

#: its saddle point
FIVE_AGENT_QUARTIC_SADDLE = (0.0, 0.0)

FIVE_AGENT_QUARTIC_MIXING = (
    (0.6, 0.0, 0.2, 0.0, 0.2),
    (0.0, 0.6, 0.0, 0.2, 0.2),
    (0.2, 0.0, 0.6, 0.2, 0.0),
    (0.0, 0.2, 0.2, 0.6, 0.0),
    (0.2, 0.2, 0.0, 0.0, 0.6),
)

#: 0-based edges of the 5-cycle matching the mixing sparsity
FIVE_AGENT_QUARTIC_EDGES = ((0, 2), (0, 4), (1, 3), (1, 4), (2, 3))

# monomials as (powers, coefficient); the five agents sum to
# x1^4 - x1^2 + x2^4 + x2^2
_FIVE_AGENT_TERMS = (
    (((4, 0), 0.25), ((2, 0), -1.0), ((0, 2), -1.0)),
    (((4, 0), 0.25), ((0, 4), 0.5), ((0, 2), 1.5)),
    (((2, 0), -1.0), ((0, 2), 1.0)),
    (((4, 0), 0.5), ((0, 2), -0.5)),
    (((2, 0), 1.0), ((0, 4), 0.5)),
)


def five_agent_quartic() -> Problem:
    graph = NetworkGraph(5, FIVE_AGENT_QUARTIC_EDGES)
    mixing = validate_mixing(FIVE_AGENT_QUARTIC_MIXING, graph)
    objectives = tuple(
        polynomial_objective(terms, dim=2) for terms in _FIVE_AGENT_TERMS
    )
    return Problem(objectives=objectives, graph=graph, mixing=mixing)


_REGISTRY: dict[str, Callable[[], Problem]] = {
    FIVE_AGENT_QUARTIC: five_agent_quartic,
}


def builtin_problem(name: str) -> Problem:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown builtin problem {name!r}; available: {sorted(_REGISTRY)}"
        ) from None
    return factory()


def builtin_problem_names() -> list[str]:
    return sorted(_REGISTRY)


#: ready-to-run experiment preset, in the same shape a parsed config
#: file has; the harness merges user overrides on top of it
EXPERIMENT_PRESETS: dict[str, dict] = {
    FIVE_AGENT_QUARTIC: {
        "problem": {"builtin": FIVE_AGENT_QUARTIC},
        "run": {
            "alpha": 0.005,
            "max_iterations": 20000,
            "init": [1e-6, 1e-6],
            "master_seed": 2024,
        },
        "noise": {"kind": "sphere", "epsilon": 1.0, "safety_factor": 0.5},
        "experiment": {
            "variants": ["DGD", "NDGD"],
            "seeds": 20,
            "output_dir": "runs/paper-sec5",
        },
        "escape": {"center": [0.0, 0.0], "radius": 0.1},
        "references": [
            [math.sqrt(2.0) / 2.0, 0.0],
            [-math.sqrt(2.0) / 2.0, 0.0],
        ],
    }
}
