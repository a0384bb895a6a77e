"""Counter-based, splittable random streams.

Every random draw in an experiment comes from a Philox stream keyed by
``(master_seed, n, trial_id, purpose)``, so a trial can be regenerated in
isolation and results do not depend on scheduling order.
"""
from __future__ import annotations

import numpy as np

PURPOSES = {"matrix": 0, "spikes": 1, "frame": 2, "aux": 3}


def stream(master_seed: int, *key: int | str) -> np.random.Generator:
    spawn_key = tuple(PURPOSES[k] if isinstance(k, str) else int(k) for k in key)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(seq))


def stream_id(master_seed: int, *key: int | str) -> str:
    return ":".join(str(k) for k in (master_seed, *key))
