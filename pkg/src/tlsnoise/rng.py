"""Keyed random streams.

Every stochastic quantity draws from its own generator derived from
``(master_seed, purpose, index)``, so results never depend on the order in
which work is scheduled.
"""
import numpy as np

ENSEMBLE = 1
FLUCTUATOR = 2
NOISE = 3
BURSTS = 4
SYNTH = 5
PROBE = 6


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
