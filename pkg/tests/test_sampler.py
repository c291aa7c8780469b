import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weylpersist.errors import FactorizationFailed, GridTooLarge, PreconditionError
from weylpersist.grids import GridSpec
from weylpersist.kernels import KernelSpec, build_corr_matrix
from weylpersist.sampler import (
    CHUNK_TRIALS,
    PathBatch,
    RngStream,
    WeylModel,
    cholesky_with_jitter,
    sample_stationary_signs,
    sample_weyl_signs,
    stationary_paths,
    weyl_paths,
)


def orthant(rho):
    """P(X > 0, Y > 0) for a standard bivariate normal with correlation rho."""
    return 0.25 + math.asin(rho) / (2 * math.pi)


def within(batch, p, k=3.0):
    half = 1.96 * math.sqrt(p * (1 - p) / batch.trials)
    return abs(batch.ratio - p) <= k * half


def test_single_point_weyl():
    b = sample_weyl_signs(WeylModel(0), GridSpec(0.0, 0.0, 1.0), 1_000_000, RngStream(1))
    assert abs(b.ratio - 0.5) <= 0.002


def test_two_point_weyl_orthant():
    b = sample_weyl_signs(WeylModel(2), GridSpec(0.0, 1.0, 1.0), 1_000_000, RngStream(2))
    assert orthant(1 / math.sqrt(2.5)) == pytest.approx(0.359, abs=5e-4)
    assert within(b, orthant(1 / math.sqrt(2.5)))


@pytest.mark.parametrize("kernel", [KernelSpec.gauss(), KernelSpec.sech()])
def test_stationary_single_point(kernel):
    b = sample_stationary_signs(kernel, 0.0, 0.05, 1_000_000, RngStream(3))
    assert b.grid.count == 1
    assert abs(b.ratio - 0.5) <= 0.002


def test_stationary_two_point_orthant():
    b = sample_stationary_signs(KernelSpec.gauss(), 1.0, 1.0, 1_000_000, RngStream(4))
    assert b.grid.count == 2
    assert orthant(math.exp(-0.5)) == pytest.approx(0.3537, abs=1e-4)
    assert within(b, orthant(math.exp(-0.5)))


def test_positive_quadratics_exist():
    b = sample_weyl_signs(WeylModel(2), GridSpec(-3.0, 3.0, 0.01), 10_000, RngStream(5))
    assert b.survived >= 1


def test_whole_line_quadratic_oracle():
    # brute-force orthant oracle: a0 + a1 x + a2 x^2/sqrt2 > 0 on R  <=>  a2 > 0, a0 > 0, a1^2 < 4 a0 a2/sqrt2
    rng = np.random.default_rng(99)
    a = rng.standard_normal((2_000_000, 3))
    p_line = np.mean((a[:, 2] > 0) & (a[:, 0] > 0) & (a[:, 1] ** 2 < 4 * a[:, 0] * a[:, 2] / math.sqrt(2)))
    b = sample_weyl_signs(WeylModel(2), GridSpec(-3.0, 3.0, 0.01), 1_000_000, RngStream(6))
    assert 0 < b.ratio < 0.5
    # a grid event contains the whole-line event
    assert b.ratio >= p_line - 3 * 1.96 * math.sqrt(p_line / 1_000_000)


@pytest.mark.parametrize("workers", [1, 3, 8])
def test_deterministic_across_workers(workers):
    grid = GridSpec(0.0, 9.0, 0.05)
    ref = sample_weyl_signs(WeylModel(50), grid, 3 * CHUNK_TRIALS + 17, RngStream(7, 2), workers=1)
    got = sample_weyl_signs(WeylModel(50), grid, 3 * CHUNK_TRIALS + 17, RngStream(7, 2), workers=workers)
    assert got.survived == ref.survived
    s1 = sample_stationary_signs(KernelSpec.gauss(), 6.0, 0.05, 20_000, RngStream(8), workers=1)
    s2 = sample_stationary_signs(KernelSpec.gauss(), 6.0, 0.05, 20_000, RngStream(8), workers=workers)
    assert s1.survived == s2.survived


def test_streams_differ():
    grid = GridSpec(0.0, 5.0, 0.05)
    a = weyl_paths(WeylModel(30), grid, 100, RngStream(9, 0))
    b = weyl_paths(WeylModel(30), grid, 100, RngStream(9, 1))
    assert not np.array_equal(a, b)


@given(st.integers(0, 2**64 - 1), st.integers(0, 1000))
def test_stream_keys_determine_draws(seed, stream):
    a = RngStream(seed, stream).generator(3).standard_normal(4)
    b = RngStream(seed, stream).generator(3).standard_normal(4)
    assert np.array_equal(a, b)


def test_more_trials_extend_fewer():
    grid = GridSpec(0.0, 8.0, 0.05)
    small = weyl_paths(WeylModel(40), grid, 5000, RngStream(10))
    big = weyl_paths(WeylModel(40), grid, CHUNK_TRIALS + 100, RngStream(10))
    np.testing.assert_array_equal(big[:5000], small)


@pytest.mark.parametrize("n,start,end", [(64, 0.0, 10.9), (100, -14.0, 14.0), (7, -2.0, 2.0)])
def test_early_abort_equivalence_weyl(n, start, end):
    grid = GridSpec(start, end, 0.05)
    on = sample_weyl_signs(WeylModel(n), grid, 30_000, RngStream(11), early_abort=True)
    off = sample_weyl_signs(WeylModel(n), grid, 30_000, RngStream(11), early_abort=False)
    mins = sample_weyl_signs(WeylModel(n), grid, 30_000, RngStream(11), record_minima=True)
    assert on.survived == off.survived == mins.survived
    assert mins.min_values.shape == (30_000,)


def test_early_abort_equivalence_stationary():
    on = sample_stationary_signs(KernelSpec.sech(), 8.0, 0.05, 30_000, RngStream(12))
    off = sample_stationary_signs(KernelSpec.sech(), 8.0, 0.05, 30_000, RngStream(12), early_abort=False)
    paths = stationary_paths(KernelSpec.sech(), 8.0, 0.05, 30_000, RngStream(12))
    assert on.survived == off.survived == int(np.count_nonzero((paths > 0).all(axis=1)))


def test_standardized_variance():
    # 4e5 draws put the 0.01 band at ~4.5 standard errors of a sample variance
    grid = GridSpec(-12.0, 12.0, 3.0)
    paths = weyl_paths(WeylModel(100), grid, 400_000, RngStream(13))
    np.testing.assert_allclose(paths.var(axis=0), 1.0, atol=0.01)
    spaths = stationary_paths(KernelSpec.gauss(), 4.0, 0.5, 400_000, RngStream(14))
    np.testing.assert_allclose(spaths.var(axis=0), 1.0, atol=0.01)


def test_slepian_grid_monotonicity():
    coarse = GridSpec(0.0, 10.9, 0.1)
    fine = GridSpec(0.0, 10.9, 0.05)
    pc = sample_weyl_signs(WeylModel(64), coarse, 200_000, RngStream(15))
    pf = sample_weyl_signs(WeylModel(64), fine, 200_000, RngStream(15))
    assert pf.survived <= pc.survived  # same draws, superset grid


def test_weyl_matches_gauss_sign_agreement():
    grid = GridSpec(0.0, 5.0, 0.05)
    trials = 200_000
    paths = weyl_paths(WeylModel(400), grid, trials, RngStream(16))
    signs = paths > 0
    for i, j in [(0, 10), (20, 40), (50, 70), (60, 100)]:
        rho = math.exp(-0.5 * ((j - i) * 0.05) ** 2)
        p = 0.5 + math.asin(rho) / math.pi
        freq = np.mean(signs[:, i] == signs[:, j])
        assert abs(freq - p) <= 3 * 1.96 * math.sqrt(p * (1 - p) / trials)


def test_weyl_and_cholesky_samplers_agree():
    grid = GridSpec(0.0, 6.0, 0.05)
    trials = 200_000
    direct = sample_weyl_signs(WeylModel(100), grid, trials, RngStream(17))
    factor, _ = cholesky_with_jitter(build_corr_matrix(KernelSpec.weyl(100), grid))
    z = RngStream(18).generator(0).standard_normal((trials, grid.count))
    chol = np.count_nonzero(((z @ factor.T) > 0).all(axis=1))
    p1, p2 = direct.ratio, chol / trials
    se = math.sqrt(p1 * (1 - p1) / trials + p2 * (1 - p2) / trials)
    assert abs(p1 - p2) <= 3 * 1.96 * se


def test_grid_beyond_reach_rejected():
    reach = WeylModel(64).reach
    with pytest.raises(PreconditionError):
        sample_weyl_signs(WeylModel(64), GridSpec(0.0, reach + 1, 0.05), 10, RngStream(1))


def test_grid_cap():
    with pytest.raises(GridTooLarge):
        sample_stationary_signs(KernelSpec.gauss(), 300.0, 0.05, 10, RngStream(1))


def test_jitter_ladder():
    mat = np.ones((3, 3))
    factor, jitter = cholesky_with_jitter(mat)
    assert jitter > 0
    np.testing.assert_allclose(factor @ factor.T, mat + jitter * np.eye(3), atol=1e-12)
    with pytest.raises(FactorizationFailed):
        cholesky_with_jitter(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_stationary_requires_stationary_kernel():
    with pytest.raises(PreconditionError):
        sample_stationary_signs(KernelSpec.weyl(4), 1.0, 0.1, 10, RngStream(1))


def test_path_batch_merge():
    g = GridSpec(0.0, 1.0, 0.5)
    a = PathBatch(g, 3, 10, np.zeros(10))
    b = PathBatch(g, 4, 5, np.ones(5))
    m = a.merge(b)
    assert (m.survived, m.trials, m.min_values.size) == (7, 15, 15)
    assert a.merge(b).survived == b.merge(a).survived
    with pytest.raises(ValueError):
        PathBatch(g, 11, 10)
    with pytest.raises(ValueError):
        a.merge(PathBatch(GridSpec(0.0, 2.0, 0.5), 0, 1))


def test_weyl_model_alpha():
    assert WeylModel(400).alpha_n == pytest.approx(20 / math.log(400), rel=1e-12)
    with pytest.raises(ValueError):
        WeylModel(-1)
