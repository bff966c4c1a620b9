"""Counter-based random streams.

Every trajectory gets its own Philox4x64-10 stream keyed by
SeedSequence(seed, spawn_key=(trajectory_index,)). Streams depend only on
(seed, index), so results do not depend on how trajectories are scheduled.
"""
import numpy as np


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))
