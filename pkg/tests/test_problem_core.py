import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from flexcd import CompositeProblem, L1, LogisticLoss, QuadraticLoss, SparseDesignMatrix, eval_F
from flexcd.problem import check_subset, coordinate_lipschitz, delta_F, commit_step
from flexcd.regularizers import ElasticNet

from conftest import random_lasso, random_logistic


def dense_logistic(A, b, x):
    return float(np.sum(np.logaddexp(0.0, -b * (A @ x))))


# -- design matrix -----------------------------------------------------------

def test_design_rejects_bad_input():
    with pytest.raises(ValueError):
        SparseDesignMatrix([0, 2], [1, 0], [1.0, 2.0], (1, 2))  # unsorted columns
    with pytest.raises(ValueError):
        SparseDesignMatrix([0, 1], [3], [1.0], (1, 2))  # column out of range
    with pytest.raises(ValueError):
        SparseDesignMatrix([0, 1], [0], [1.0], (1, 2), nnz=2)  # header nnz mismatch
    with pytest.raises(ValueError):
        SparseDesignMatrix([0, 1], [0], [np.nan], (1, 2))


def test_design_allows_row_boundary_decrease():
    A = SparseDesignMatrix([0, 2, 4], [0, 1, 0, 1], [1.0, 2.0, 3.0, 4.0], (2, 2))
    assert A.toarray() == pytest.approx(np.array([[1, 2], [3, 4]]))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), size=st.integers(1, 6), m=st.sampled_from([3, 40]))
def test_column_block_products_match_dense(seed, size, m):
    rng = np.random.default_rng(seed)
    n = 6
    dense = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.4)
    A = SparseDesignMatrix.from_dense(dense)
    S = np.sort(rng.choice(n, size=size, replace=False))
    blk = A.block(S)
    v = rng.standard_normal(size)
    rows, vals = blk.matvec(v)
    full = np.zeros(m)
    full[rows] = vals
    assert full == pytest.approx(dense[:, S] @ v, abs=1e-12)
    r = rng.standard_normal(m)
    assert blk.rmatvec(r) == pytest.approx(dense[:, S].T @ r, abs=1e-12)
    assert blk.rmatvec_touched(r[rows]) == pytest.approx(dense[:, S].T @ r, abs=1e-12)
    assert blk.dense().T @ blk.dense() == pytest.approx(dense[:, S].T @ dense[:, S], abs=1e-12)


# -- losses ------------------------------------------------------------------

def test_quadratic_value_and_gradient_finite_differences():
    problem, A, b = random_lasso(seed=1)
    loss = problem.loss
    x = np.random.default_rng(2).standard_normal(A.shape[1])
    assert loss.value(x) == pytest.approx(0.5 * np.sum((A @ x - b) ** 2))
    h = 1e-6
    fd = np.array([(loss.value(x + h * e) - loss.value(x - h * e)) / (2 * h) for e in np.eye(len(x))])
    assert loss.gradient(x) == pytest.approx(fd, rel=1e-6, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_logistic_gradient_and_hessian_finite_differences(seed):
    problem, A, b = random_logistic(seed=seed)
    loss = problem.loss
    x = np.random.default_rng(seed).standard_normal(A.shape[1])
    assert loss.value(x) == pytest.approx(dense_logistic(A, b, x), rel=1e-12)
    h = 1e-6
    eye = np.eye(len(x))
    fd = np.array([(loss.value(x + h * e) - loss.value(x - h * e)) / (2 * h) for e in eye])
    assert loss.gradient(x) == pytest.approx(fd, rel=1e-5, abs=1e-6)
    state = problem.start(x)
    S = np.arange(len(x))
    fd_hess = np.array([(loss.gradient(x + h * e) - loss.gradient(x - h * e)) / (2 * h) for e in eye])
    assert state.hessian_block(S) == pytest.approx(fd_hess, rel=1e-5, abs=1e-6)
    assert state.hessian_diag(S) == pytest.approx(np.diag(fd_hess), rel=1e-5, abs=1e-6)


def test_lipschitz_constants():
    problem, A, _ = random_lasso(seed=3)
    assert problem.lipschitz() == pytest.approx(np.sum(A * A, axis=0))
    assert coordinate_lipschitz(problem, 2) == pytest.approx(np.sum(A[:, 2] ** 2))
    logi, A2, _ = random_logistic(seed=3)
    assert logi.lipschitz() == pytest.approx(0.25 * np.sum(A2 * A2, axis=0))
    assert logi.loss.global_lipschitz() == pytest.approx(0.25 * np.linalg.eigvalsh(A2.T @ A2)[-1])


def test_logistic_labels_validated():
    A = SparseDesignMatrix.from_dense(np.eye(2))
    with pytest.raises(ValueError):
        LogisticLoss(A, np.array([1.0, 0.5]))


# -- composite problem and state --------------------------------------------

def test_eval_F_and_shape_check():
    problem, A, b = random_lasso(seed=4, c=0.5)
    x = np.linspace(-1, 1, A.shape[1])
    assert eval_F(problem, x) == pytest.approx(0.5 * np.sum((A @ x - b) ** 2) + 0.5 * np.abs(x).sum())
    with pytest.raises(ValueError):
        eval_F(problem, np.zeros(A.shape[1] + 1))


def test_check_subset():
    assert list(check_subset([0, 3], 5)) == [0, 3]
    for bad in ([3, 1], [1, 1], [5], []):
        with pytest.raises(ValueError):
            check_subset(bad, 5)


def test_strong_convexity_order_enforced():
    problem, _, _ = random_lasso()
    with pytest.raises(ValueError):
        CompositeProblem(problem.loss, problem.reg, mu_f=2.0, mu_F=1.0)
    with pytest.raises(ValueError):
        CompositeProblem(problem.loss, problem.reg, mu_f=-1.0)


@pytest.mark.parametrize("maker", [random_lasso, random_logistic], ids=["quadratic", "logistic"])
def test_partial_gradient_and_hessian_product(maker):
    problem, A, b = maker(seed=5)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(A.shape[1])
    state = problem.start(x)
    S = np.array([0, 2, 5])
    full = problem.loss.gradient(x)
    assert state.partial_gradient(S) == pytest.approx(full[S], abs=1e-12)
    assert state.full_gradient() == pytest.approx(full, abs=1e-12)
    v = rng.standard_normal(3)
    H = state.hessian_block(S)
    assert state.hessian_product(S, v) == pytest.approx(H @ v, abs=1e-12)
    with pytest.raises(ValueError):
        state.hessian_product(S, np.ones(2))


@pytest.mark.parametrize("maker", [random_lasso, random_logistic], ids=["quadratic", "logistic"])
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.floats(1e-3, 2.0))
def test_delta_F_matches_recomputation(maker, seed, alpha):
    problem, A, _ = maker(seed=seed % 7)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    state = problem.start(x)
    S = np.sort(rng.choice(A.shape[1], size=3, replace=False))
    t = rng.standard_normal(3)
    y = x.copy()
    y[S] += alpha * t
    expected = eval_F(problem, x) - eval_F(problem, y)
    assert delta_F(state, S, t, alpha) == pytest.approx(expected, rel=1e-9, abs=1e-10)


@pytest.mark.parametrize("maker", [random_lasso, random_logistic], ids=["quadratic", "logistic"])
def test_cache_coherence_after_many_commits(maker):
    problem, A, _ = maker(seed=6)
    rng = np.random.default_rng(1)
    state = problem.start()
    n = A.shape[1]
    for _ in range(10_000):
        S = np.sort(rng.choice(n, size=2, replace=False))
        t = 0.01 * rng.standard_normal(2)
        commit_step(state, S, t, 0.5)
    assert state.F == pytest.approx(eval_F(problem, state.x), rel=1e-10)
    fresh = problem.start(state.x)
    assert state.cache.aux == pytest.approx(fresh.cache.aux, abs=1e-10)


def test_commit_reports_realised_decrease_and_refreshes():
    problem, A, _ = random_logistic(seed=8)
    state = problem.start(refresh_every=3)
    S = np.array([1, 4])
    t = np.array([0.3, -0.2])
    before = eval_F(problem, state.x)
    got = state.commit(S, t, 1.0)
    assert got == pytest.approx(before - eval_F(problem, state.x), abs=1e-12)
    for _ in range(2):
        state.commit(S, t, 1.0)
    assert state.refreshes == 2
    with pytest.raises(ValueError):
        state.commit(S, t, 0.0)


def test_logistic_cache_holds_sigmoid():
    problem, A, b = random_logistic(seed=9)
    x = np.ones(A.shape[1])
    state = problem.start(x)
    assert state.cache.sig == pytest.approx(expit(-b * (A @ x)))


def test_state_copy_is_independent():
    problem, _, _ = random_lasso(seed=10)
    state = problem.start()
    clone = state.copy()
    clone.commit(np.array([0]), np.array([1.0]), 1.0)
    assert state.x[0] == 0.0 and clone.x[0] == 1.0
    assert state.F == pytest.approx(eval_F(problem, state.x))


def test_logistic_decrease_stable_for_large_margins():
    A = SparseDesignMatrix.from_dense(np.array([[1.0], [1.0]]))
    problem = CompositeProblem(LogisticLoss(A, np.array([1.0, 1.0])), ElasticNet(0.1, 0.1))
    state = problem.start(np.array([800.0]))
    d = state.delta_F(np.array([0]), np.array([-1600.0]), 1.0)
    assert np.isfinite(d)
    y = np.array([-800.0])
    assert d == pytest.approx(eval_F(problem, np.array([800.0])) - eval_F(problem, y), rel=1e-12)


# -- small worked examples ---------------------------------------------------

def identity_lasso():
    A = SparseDesignMatrix.from_dense(np.eye(2))
    return CompositeProblem(QuadraticLoss(A, np.array([1.0, 0.0])), L1(1.0))


def test_worked_examples_quadratic():
    problem = identity_lasso()
    assert eval_F(problem, np.zeros(2)) == pytest.approx(0.5)
    state = problem.start()
    assert state.partial_gradient(np.array([0])) == pytest.approx([-1.0])
    assert state.hessian_product(np.array([0, 1]), np.array([2.0, -3.0])) == pytest.approx([2.0, -3.0])
    assert state.delta_F(np.array([0]), np.array([1.0]), 1.0) == pytest.approx(-0.5)
    assert state.delta_F(np.array([0]), np.array([0.0]), 0.7) == 0.0


def test_worked_examples_logistic():
    A = SparseDesignMatrix.from_dense(np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]]))
    problem = CompositeProblem(LogisticLoss(A, np.array([1.0, -1.0, 1.0])), L1(0.1))
    assert problem.loss.value(np.zeros(2)) == pytest.approx(3 * np.log(2.0))
    single = LogisticLoss(SparseDesignMatrix.from_dense(np.array([[1.0, 0.0]])), np.array([1.0]))
    state = CompositeProblem(single, L1(1.0)).start()
    assert state.partial_gradient(np.array([0])) == pytest.approx([-0.5])
    state = problem.start()
    dense = A.toarray()
    v = np.array([0.4, -1.2])
    assert state.hessian_product(np.array([0, 1]), v) == pytest.approx(0.25 * dense.T @ dense @ v)


def test_coordinate_lipschitz_examples():
    A = SparseDesignMatrix.from_dense(np.array([[3.0, 2.0], [4.0, 0.0]]))
    assert coordinate_lipschitz(CompositeProblem(QuadraticLoss(A, np.zeros(2)), L1(1.0)), 0) == pytest.approx(25.0)
    logi = CompositeProblem(LogisticLoss(A, np.array([1.0, -1.0])), L1(1.0))
    assert coordinate_lipschitz(logi, 1) == pytest.approx(1.0)


@pytest.mark.parametrize("maker", [random_lasso, random_logistic], ids=["quadratic", "logistic"])
def test_coordinate_lipschitz_secant_bound(maker):
    problem, A, _ = maker(seed=11)
    rng = np.random.default_rng(3)
    L = problem.lipschitz()
    for _ in range(200):
        x = rng.standard_normal(A.shape[1]) * 2
        i = rng.integers(A.shape[1])
        step = rng.standard_normal() * 3
        y = x.copy()
        y[i] += step
        diff = problem.loss.gradient(y)[i] - problem.loss.gradient(x)[i]
        assert abs(diff) <= L[i] * abs(step) * (1 + 1e-10)


def test_delta_F_after_commit_matches_fresh_state():
    problem, A, _ = random_logistic(seed=12)
    state = problem.start()
    S = np.array([0, 3])
    state.commit(S, np.array([0.5, -0.4]), 1.0)
    fresh = problem.start(state.x)
    t = np.array([0.2, 0.1])
    assert state.delta_F(S, t, 0.5) == pytest.approx(fresh.delta_F(S, t, 0.5), rel=1e-10)


def test_quadratic_residual_drift_is_small():
    problem, A, b = random_lasso(seed=13, m=30, n=12)
    rng = np.random.default_rng(4)
    state = problem.start()
    for _ in range(10_000):
        S = np.sort(rng.choice(12, size=3, replace=False))
        state.commit(S, 0.05 * rng.standard_normal(3), 1.0)
    assert np.max(np.abs(state.cache.aux - (A @ state.x - b))) <= 1e-8
