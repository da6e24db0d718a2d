"""Counter-based random streams.

Every random draw in the package comes from a ``Philox`` generator keyed by
the user seed plus a fixed tuple of integers, so a draw depends only on its
key and never on the order in which work is scheduled.
"""

from __future__ import annotations

import numpy as np

# Stream tags separate independent uses of one user seed.
PATHS = 0
TEST_POINTS = 1
TEST_PORTFOLIOS = 2
PERTURBATIONS = 3
ORACLE_MODELS = 4
PRIMAL_PERTURBATIONS = 5
BRIDGE = 6


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def block_generator(seed: int, block_index: int) -> np.random.Generator:
    """Generator of path block ``block_index``."""
    return stream(seed, PATHS, block_index)


def bridge_generator(seed: int, block_index: int) -> np.random.Generator:
    """Generator of the grid-dependent Brownian bridge draws of a block."""
    return stream(seed, BRIDGE, block_index)


def path_blocks(n_paths: int, block_size: int) -> list[tuple[int, int, int]]:
    """
    Split ``n_paths`` into consecutive blocks.

    Returns:
        (block_index, first_path, count) triples in block order.

    Raises:
        ValueError: If a count is not positive.
    """
    if n_paths <= 0:
        raise ValueError(f"n_paths must be positive, got {n_paths}")
    if block_size <= 0:
        raise ValueError(f"block_size must be positive, got {block_size}")
    return [
        (j, start, min(block_size, n_paths - start))
        for j, start in enumerate(range(0, n_paths, block_size))
    ]
