"""Networks, mixing matrices, and their spectra.

A mixing matrix encodes how agents average their neighbors' iterates:
symmetric, doubly stochastic, strictly diagonally dominant, and
consistent with the communication graph. Its second-largest eigenvalue
controls how fast averaging contracts disagreement (through the
spectral gap 1 - lambda_2), and its minimum eigenvalue enters both the
perturbation variance budget and the step-size caps.
"""

import numpy as np

from dgdlab import (
    MixingValidationError,
    NetworkGraph,
    generate_mixing,
    is_connected,
    neighbors,
    validate_mixing,
)
from dgdlab.problems import FIVE_AGENT_QUARTIC_EDGES, FIVE_AGENT_QUARTIC_MIXING

# --- the bundled 5-agent cycle -------------------------------------------
graph = NetworkGraph(5, FIVE_AGENT_QUARTIC_EDGES)
print("5-agent cycle:", graph)
print("connected:", is_connected(graph))
for i in range(5):
    print(f"  agent {i + 1} talks to {[j + 1 for j in neighbors(graph, i)]}")

mixing = validate_mixing(FIVE_AGENT_QUARTIC_MIXING, graph)
s = mixing.spectral
print("\neigenvalues:", np.round(s.eigenvalues, 7))
print(f"lambda_2 = {s.lambda_2:.7f}  (spectral gap {s.spectral_gap:.7f})")
print(f"lambda_min = {s.lambda_min:.7f}")

# --- what validation rejects ---------------------------------------------
print("\nvalidation failures carry a code naming the broken property:")
bad_cases = {
    "asymmetric": [[0.8, 0.2], [0.3, 0.7]],
    "bad row sums": [[0.7, 0.2], [0.2, 0.7]],
    "no dominance": [[0.5, 0.5], [0.5, 0.5]],
}
pair = NetworkGraph(2, [(0, 1)])
for label, w in bad_cases.items():
    try:
        validate_mixing(w, pair)
    except MixingValidationError as exc:
        print(f"  {label}: [{exc.code}] {exc}")

# --- generating a valid matrix instead of typing one ----------------------
star = NetworkGraph(4, [(0, 1), (0, 2), (0, 3)])
w = generate_mixing(star, beta=0.3)
print("\nlazy-Metropolis weights on a 4-agent star (beta=0.3):")
print(np.round(w, 3))
print("validates:", validate_mixing(w, star).spectral)
