"""Deterministic initial data from the splitmix64 generator."""
import logging

import numpy as np

from membrane.domain.config import RunConfig
from membrane.domain.mesh import TorusMesh
from membrane.domain.state import SimState

logger = logging.getLogger(__name__)

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
MIX_2 = np.uint64(0x94D049BB133111EB)
UNIT_53 = 2.0 ** -53


def splitmix64(seed: int, count: int) -> np.ndarray:
    """The first ``count`` outputs of splitmix64 seeded with ``seed``, as uint64."""
    # uint64 array arithmetic wraps modulo 2**64
    with np.errstate(over="ignore"):
        z = np.uint64(seed % 2 ** 64) + np.arange(1, count + 1, dtype=np.uint64) * GOLDEN_GAMMA
        z = (z ^ (z >> np.uint64(30))) * MIX_1
        z = (z ^ (z >> np.uint64(27))) * MIX_2
    return z ^ (z >> np.uint64(31))


def uniform_draws(seed: int, count: int) -> np.ndarray:
    """Uniform samples in [0, 1) from the top 53 bits of each output."""
    return (splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) * UNIT_53


def init_fields(config: RunConfig, mesh: TorusMesh) -> SimState:
    """u = mean + uniform noise in [-amplitude, amplitude], shifted to the exact mean; h constant."""
    init = config.init
    N = mesh.vertex_count
    u = np.full(N, init.mean_u, dtype=float)
    if init.amplitude > 0:
        u += init.amplitude * (2.0 * uniform_draws(init.seed, N) - 1.0)
        # lumped weights are uniform, so the discrete mean is the plain mean
        u += init.mean_u - u.mean()
    h = np.full(N, init.h0_const, dtype=float)
    logger.debug(f"Initial data n={mesh.n} seed={init.seed}: mean={u.mean():.15f}")
    return SimState.from_fields(u, h)
