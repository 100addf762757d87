import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nvgames.distributions import DiscreteMarginal, Instance
from nvgames.stress import ExperimentConfig, gen_instance


@pytest.fixture
def t1() -> Instance:
    """Two retailers in two blocks: demand {1,3} equiprobable and a point
    mass at 2, price 2, cost 1. The consistency polytope is a singleton."""
    return Instance(
        price=2.0,
        cost=1.0,
        partition=((0,), (1,)),
        marginals=(
            DiscreteMarginal(np.array([[1.0], [3.0]]), np.array([0.5, 0.5])),
            DiscreteMarginal(np.array([[2.0]]), np.array([1.0])),
        ),
    )


@pytest.fixture
def t2() -> Instance:
    """Two singleton blocks, both with demand {1,3} equiprobable; the
    polytope is the 2x2 transportation square with two vertices."""
    m = DiscreteMarginal(np.array([[1.0], [3.0]]), np.array([0.5, 0.5]))
    return Instance(price=2.0, cost=1.0, partition=((0,), (1,)), marginals=(m, m))


def make_example1(k: int, d_total: float = 1.0, price: float = 1.5, cost: float = 1.0) -> Instance:
    """Three retailers: block one holds (d1, D - d1) with d1 uniform on
    {D/K, ..., D}; block two holds d3 uniform on the same grid."""
    grid = np.arange(1, k + 1) * (d_total / k)
    m1 = DiscreteMarginal(np.column_stack([grid, d_total - grid]), np.full(k, 1.0 / k))
    m2 = DiscreteMarginal(grid[:, None], np.full(k, 1.0 / k))
    return Instance(price, cost, ((0, 1), (2,)), (m1, m2))


@pytest.fixture
def example1_small() -> Instance:
    return make_example1(24)


def random_instance(
    seed: int,
    n: int = 4,
    block_sizes=(2, 2),
    atoms_per_block=(2, 2),
    support=(1, 10),
    price: float = 1.5,
    cost: float = 1.0,
) -> Instance:
    cfg = ExperimentConfig(
        n=n,
        block_sizes=tuple(block_sizes),
        atoms_per_block=tuple(atoms_per_block),
        support_lo=support[0],
        support_hi=support[1],
        price=price,
        cost=cost,
        num_instances=1,
        seed=seed,
    )
    return gen_instance(cfg, seed)
