import numpy as np
import pytest
from scipy import sparse

from flexcd import CompositeProblem, L1, LogisticLoss, QuadraticLoss, SparseDesignMatrix


def random_design(rng, m, n, density=0.5):
    M = sparse.random(m, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    dense = M.toarray()
    # keep every column nonzero
    empty = ~dense.any(axis=0)
    dense[0, empty] = 1.0
    return SparseDesignMatrix.from_dense(dense), dense


def random_lasso(seed=0, m=8, n=6, c=0.3, density=0.6):
    rng = np.random.default_rng(seed)
    A, dense = random_design(rng, m, n, density)
    b = rng.standard_normal(m)
    return CompositeProblem(QuadraticLoss(A, b), L1(c)), dense, b


def random_logistic(seed=0, m=12, n=6, c=0.3, density=0.6):
    rng = np.random.default_rng(seed)
    A, dense = random_design(rng, m, n, density)
    b = rng.choice([-1.0, 1.0], size=m)
    return CompositeProblem(LogisticLoss(A, b), L1(c)), dense, b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
