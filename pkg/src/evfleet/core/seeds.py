"""Counter-based seed splitting.

A single user seed is expanded into independent integer seeds, one per
component, so that changing one solver's parameters never perturbs another
component's random stream.
"""

import numpy as np

# Fixed spawn keys; never renumber existing entries.
COMPONENTS = {
    "generator": 0,
    "sa": 1,
    "tabu": 2,
    "feasible-anneal": 3,
    "bench": 4,
}


def component_seed(seed: int, component: str, index: int = 0) -> int:
    """Derive a 63-bit seed for ``component`` (and sub-stream ``index``)."""
    if component not in COMPONENTS:
        raise ValueError(f"Unknown seed component: {component}")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(COMPONENTS[component], index))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def restart_rngs(seed: int, restarts: int) -> list[np.random.Generator]:
    """One independent generator per restart, reproducible from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(restarts)
    return [np.random.default_rng(child) for child in children]
