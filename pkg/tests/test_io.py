import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from flexcd import (
    ElasticNet, FcdConfig, InexactnessPolicy, L1, PrincipalMinor, SparseDesignMatrix, SyntheticRecipe,
    eval_F, fcd_run, generate_synthetic, parse_libsvm, write_libsvm,
)
from flexcd.libsvm import LibsvmFormatError


def write(tmp_path, text, name="d.libsvm"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_single_feature(tmp_path):
    A, b = parse_libsvm(write(tmp_path, "+1 3:0.5\n"))
    assert A.shape == (1, 3) and A.toarray()[0].tolist() == [0.0, 0.0, 0.5] and b.tolist() == [1.0]


def test_parse_empty_row_comments_and_zero_label(tmp_path):
    A, b = parse_libsvm(write(tmp_path, "# header\n-1\n\n0 1:2 2:-1\n+1 2:4\n"))
    assert A.toarray().tolist() == [[0.0, 0.0], [2.0, -1.0], [0.0, 4.0]]
    assert b.tolist() == [-1.0, -1.0, 1.0]


def test_parse_n_features(tmp_path):
    A, _ = parse_libsvm(write(tmp_path, "1 2:1\n"), n_features=5)
    assert A.shape == (1, 5)


@pytest.mark.parametrize("text", ["2 1:1\n", "1 0:1\n", "1 3:1 2:1\n", "1 1:x\n", "1 1\n", "abc 1:1\n",
                                  "1 1:nan\n"])
def test_parse_errors_name_the_line(tmp_path, text):
    with pytest.raises(LibsvmFormatError) as info:
        parse_libsvm(write(tmp_path, "1 1:1\n" + text))
    assert info.value.lineno == 2


def test_real_targets(tmp_path):
    _, b = parse_libsvm(write(tmp_path, "2.5 1:1\n-0.25 1:2\n"), binary=False)
    assert b.tolist() == [2.5, -0.25]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 15), n=st.integers(1, 15), binary=st.booleans())
def test_round_trip(tmp_path_factory, seed, m, n, binary):
    rng = np.random.default_rng(seed)
    M = sparse.random(m, n, density=0.3, random_state=rng, data_rvs=rng.standard_normal, format="csr")
    A = SparseDesignMatrix.from_scipy(M)
    b = rng.choice([-1.0, 1.0], size=m) if binary else rng.standard_normal(m)
    path = tmp_path_factory.mktemp("rt") / "x.libsvm"
    write_libsvm(path, A, b)
    A2, b2 = parse_libsvm(path, n_features=n, binary=binary)
    assert np.array_equal(A2.csr.indptr, A.csr.indptr)
    assert np.array_equal(A2.csr.indices, A.csr.indices)
    assert np.array_equal(A2.csr.data, A.csr.data)
    assert np.array_equal(b2, b)


# -- synthetic instances -----------------------------------------------------

def test_condition_one_gives_scaled_identity_hessian():
    inst = generate_synthetic(SyntheticRecipe(N=10, m=20, cond=1.0, seed=1))
    A = inst.problem.loss.A.toarray()
    G = A.T @ A
    assert G == pytest.approx(G[0, 0] * np.eye(10), abs=1e-12)


def test_requested_condition_number():
    inst = generate_synthetic(SyntheticRecipe(N=30, m=60, cond=1e3, seed=2))
    ev = np.linalg.eigvalsh(inst.problem.loss.A.toarray().T @ inst.problem.loss.A.toarray())
    assert ev[-1] / ev[0] == pytest.approx(1e3, rel=1e-8)


def test_sparsity_fraction():
    inst = generate_synthetic(SyntheticRecipe(N=1000, m=500, sparsity=0.1, seed=3))
    frac = inst.problem.loss.A.nnz / (1000 * 500)
    assert abs(frac - 0.1) <= 0.01


@pytest.mark.parametrize("reg", [None, L1(0.2), ElasticNet(0.1, 0.3)], ids=["zero", "l1", "elastic"])
def test_planted_optimum_is_stationary(reg):
    inst = generate_synthetic(SyntheticRecipe(N=20, m=40, cond=10.0, seed=4), reg)
    problem, x = inst.problem, inst.x_star
    g = problem.loss.gradient(x)
    assert np.max(np.abs(g + problem.reg.conj_prox(x - g))) <= 1e-10
    assert inst.F_star == pytest.approx(eval_F(problem, x))


def test_solver_reaches_planted_solution():
    inst = generate_synthetic(SyntheticRecipe(N=20, m=40, cond=10.0, seed=5))
    cfg = FcdConfig(tau=5, strategy=PrincipalMinor(), max_iters=20_000, stat_tol=1e-12,
                    policy=InexactnessPolicy(eta=0.5))
    trace = fcd_run(inst.problem, cfg)
    assert np.linalg.norm(trace.x - inst.x_star) <= 1e-6


def test_logistic_recipe_margins():
    inst = generate_synthetic(SyntheticRecipe(kind="logistic", N=30, m=200, margin=0.1, seed=6), L1(0.1))
    loss = inst.problem.loss
    assert loss.m == 200 and set(np.unique(loss.b)) <= {-1.0, 1.0}
    assert inst.x_star is None and inst.F_star is None


def test_recipe_validation():
    for kw in ({"kind": "hinge"}, {"cond": 0.5}, {"sparsity": 0.0}, {"label_noise": 0.5}):
        with pytest.raises(ValueError):
            SyntheticRecipe(**kw)
