"""Counter-based random streams keyed by (master seed, replication, purpose).

Every replication draws from its own Philox stream, so results never depend
on the order in which replications are executed or on how they are split
across workers.
"""

import numpy as np

PURPOSES = {
    "path": 0,  # driving Brownian increments
    "bridge": 1,  # bridge refinement of the driving path
    "fresh_bridge": 2,  # independent bridges of the coupled path
    "simulate": 3,
}


def stream(master_seed: int, rep: int = 0, purpose: str = "path") -> np.random.Generator:
    if master_seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(rep), PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(ss))
