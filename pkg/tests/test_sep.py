import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynoct.errors import DegenerateFitError
from dynoct.forward import SignalRecord
from dynoct.medium import PixelGrid
from dynoct.sep import (
    CasoratiMatrix,
    build_casorati,
    compute_svd,
    default_interval_length,
    filter_matrix,
    fit_breakpoint,
    normalize_minmax,
    normalized_error,
    oracle_cutoff,
    reconstruct_intensity,
    select_cutoff,
    select_index_set,
    tv_seminorm,
    tv_sequence,
    two_piece_fit,
)


def _rec(j, x):
    x = np.asarray(x, float)
    return SignalRecord(j, x, x, np.zeros_like(x))


# Casorati ---------------------------------------------------------------

def test_casorati_layout():
    g = PixelGrid(2, 2)
    recs = [_rec(j, [10 * j + k for k in range(3)]) for j in (3, 1, 0, 2)]
    A = build_casorati(recs, g)
    assert A.data.shape == (4, 3)
    np.testing.assert_array_equal(A.data[:, 0], [0, 10, 20, 30])
    np.testing.assert_array_equal(A.data[2], [20, 21, 22])


def test_casorati_single_pixel():
    A = build_casorati([_rec(0, [1.0, 2.0])], PixelGrid(1, 1))
    assert A.data.shape == (1, 2)


@pytest.mark.parametrize("recs", [
    [_rec(0, [1.0, 2.0]), _rec(1, [1.0])],
    [_rec(0, [1.0]), _rec(0, [2.0])],
    [_rec(0, [1.0])],
])
def test_casorati_rejects_bad_records(recs):
    with pytest.raises(ValueError):
        build_casorati(recs, PixelGrid(1, 2))


def test_casorati_rejects_nonfinite():
    with pytest.raises(ValueError):
        CasoratiMatrix(np.array([[1.0, np.nan]]), PixelGrid(1, 1))


# SVD --------------------------------------------------------------------

def test_svd_small_cases():
    u, v = np.array([3.0, 4.0]) / 5, np.array([1.0, 0.0, 0.0])
    svd = compute_svd(7 * np.outer(u, v))
    assert np.isclose(svd.sigma[0], 7) and svd.sigma[1] < 1e-14
    svd = compute_svd(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(svd.sigma, [3.0, 1.0])


def test_svd_reconstructs_and_is_orthonormal(rng):
    A = rng.standard_normal((40, 60))
    svd = compute_svd(A)
    assert np.linalg.norm(svd.reconstruct() - A) / np.linalg.norm(A) < 1e-12
    np.testing.assert_allclose(svd.U.T @ svd.U, np.eye(40), atol=1e-12)
    np.testing.assert_allclose(svd.V.T @ svd.V, np.eye(40), atol=1e-12)
    assert np.all(np.diff(svd.sigma) <= 0)
    pivots = svd.U[np.argmax(np.abs(svd.U), axis=0), np.arange(40)]
    assert np.all(pivots > 0)


def test_svd_sign_is_stable_under_negation(rng):
    A = rng.standard_normal((10, 15))
    a, b = compute_svd(A), compute_svd(-A)
    np.testing.assert_allclose(a.U, b.U, atol=1e-12)
    np.testing.assert_allclose(a.V, -b.V, atol=1e-12)


def test_svd_rejects_nonfinite():
    with pytest.raises(ValueError):
        compute_svd(np.array([[1.0, np.inf]]))


def test_eckart_young_rank_one(rng):
    A = rng.standard_normal((20, 30))
    svd = compute_svd(A)
    best = np.linalg.norm(A - svd.sigma[0] * np.outer(svd.U[:, 0], svd.V[:, 0]), 2)
    assert np.isclose(best, svd.sigma[1])
    for _ in range(100):
        B = np.outer(rng.standard_normal(20), rng.standard_normal(30))
        assert best <= np.linalg.norm(A - B, 2) + 1e-12


# TV and breakpoint ------------------------------------------------------

def test_tv_examples():
    assert tv_seminorm([5.0, 5.0, 5.0]) == 0.0
    assert tv_seminorm([0.0, 1.0, 0.0]) == 2.0
    assert tv_seminorm([3.0]) == 0.0
    with pytest.raises(ValueError):
        tv_seminorm([])


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_tv_of_sorted_sequence_telescopes(xs):
    xs = sorted(xs)
    assert np.isclose(tv_seminorm(xs), xs[-1] - xs[0], rtol=1e-12, atol=1e-9)


def test_tv_sequence_matches_columns(rng):
    svd = compute_svd(rng.standard_normal((6, 9)))
    seq = tv_sequence(svd)
    assert seq.shape == (6,)
    for i in range(6):
        assert np.isclose(seq[i], tv_seminorm(svd.V[:, i]))


def _planted(b, n, noise, rng):
    i = np.arange(1, n + 1, dtype=float)
    s = np.where(i < b, 0.01 * (b - i) ** 2 + 1.0, 1.0 + 0.01 * (i - b))
    return s * (1 + noise * rng.standard_normal(n))


def test_two_piece_fit_is_exact_on_spline():
    i = np.arange(1, 41, dtype=float)
    s = np.where(i <= 20, 2 + 0.5 * (i - 20) + 0.1 * (i - 20) ** 2, 2 - 0.3 * (i - 20) ** 2)
    fit, rss = two_piece_fit(s, 20)
    assert rss < 1e-20
    np.testing.assert_allclose(fit, s, atol=1e-10)
    assert fit_breakpoint(s) == 20


def test_planted_breakpoint_with_noise(rng):
    hits = [fit_breakpoint(_planted(30, 200, 0.01, rng)) for _ in range(10)]
    assert all(27 <= h <= 33 for h in hits)


def test_flat_tv_is_degenerate():
    with pytest.raises(DegenerateFitError):
        fit_breakpoint(np.full(50, 3.0))


def test_too_short_tv_raises():
    with pytest.raises(ValueError):
        fit_breakpoint(np.arange(5.0))


def test_rank_one_cutoff_is_degenerate(rng):
    A = np.outer(rng.standard_normal(30), rng.standard_normal(40))
    with pytest.raises(DegenerateFitError):
        select_cutoff(compute_svd(A))


def test_cutoff_finds_smooth_block(rng):
    # 6 smooth high-energy components over white noise
    nx, nt = 60, 300
    t = np.linspace(0, 1, nt)
    smooth = sum(50 * np.outer(rng.standard_normal(nx), np.cos(np.pi * k * t)) for k in range(6))
    A = smooth + rng.standard_normal((nx, nt))
    assert 4 <= select_cutoff(compute_svd(A)) <= 10


# index sets, filtering, intensity --------------------------------------

def test_index_set_cases():
    assert select_index_set(1, 3, 3).indices == (1, 2, 3)
    assert select_index_set(2, 0, 3).indices == ()
    with pytest.raises(ValueError):
        select_index_set(2, 3, 3)
    with pytest.raises(ValueError):
        select_index_set(0, 1, 3)


def test_filter_matrix_cases(rng):
    A = rng.standard_normal((8, 12))
    svd = compute_svd(A)
    np.testing.assert_allclose(filter_matrix(svd, select_index_set(1, 8, 8)), A, atol=1e-12)
    assert not filter_matrix(svd, select_index_set(1, 0, 8)).any()
    R = np.outer(rng.standard_normal(8), rng.standard_normal(12))
    svd1 = compute_svd(R)
    np.testing.assert_allclose(filter_matrix(svd1, select_index_set(1, 1, 8)), R, atol=1e-12)


def test_intensity_cases(rng):
    g = PixelGrid(2, 3)
    u = rng.standard_normal(6)
    R = np.outer(u, rng.standard_normal(10))
    svd = compute_svd(R)
    imap = reconstruct_intensity(svd, select_index_set(1, 1, 6), g)
    np.testing.assert_allclose(imap.values, np.abs(u) * np.linalg.norm(R[0]) / abs(u[0]),
                               rtol=1e-12)
    empty = reconstruct_intensity(svd, select_index_set(1, 0, 6), g)
    assert not empty.values.any()
    assert imap.image().shape == (2, 3)


def test_intensity_matches_explicit_outer_products(rng):
    A = rng.standard_normal((30, 50))
    svd = compute_svd(A)
    T = select_index_set(3, 8, svd.rank)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    AT = np.zeros_like(A)
    for i in range(2, 10):
        AT += s[i] * np.outer(U[:, i], Vt[i])
    I = reconstruct_intensity(svd, T, PixelGrid(5, 6)).values
    np.testing.assert_allclose(I**2, np.sum(AT**2, axis=1), rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 64), st.integers(1, 128), st.data())
def test_intensity_is_row_energy(nx, nt, data):
    seed = data.draw(st.integers(0, 2**32 - 1))
    A = np.random.default_rng(seed).standard_normal((nx, nt))
    svd = compute_svd(A)
    r = svd.rank
    cutoff = data.draw(st.integers(1, r))
    length = data.draw(st.integers(0, r - cutoff + 1))
    T = select_index_set(cutoff, length, r)
    I = reconstruct_intensity(svd, T, PixelGrid(1, nx)).values
    energy = np.sum(filter_matrix(svd, T) ** 2, axis=1)
    np.testing.assert_allclose(I**2, energy, rtol=1e-10, atol=1e-12 * np.sum(A * A))


def test_permutation_equivariance(rng):
    A = rng.standard_normal((20, 40))
    perm = rng.permutation(20)
    T = select_index_set(2, 5, 20)
    g = PixelGrid(4, 5)
    I = reconstruct_intensity(compute_svd(A), T, g).values
    Ip = reconstruct_intensity(compute_svd(A[perm]), T, g).values
    np.testing.assert_allclose(Ip, I[perm], rtol=1e-10)


def test_scale_equivariance(rng):
    nx, nt = 60, 300
    t = np.linspace(0, 1, nt)
    smooth = sum(50 * np.outer(rng.standard_normal(nx), np.cos(np.pi * k * t)) for k in range(6))
    A = smooth + rng.standard_normal((nx, nt))
    g = PixelGrid(6, 10)
    base = compute_svd(A)
    l = select_cutoff(base)
    T = select_index_set(l, 10, base.rank)
    I = reconstruct_intensity(base, T, g).values
    for alpha in (1e-3, 7.0, 1e4):
        svd = compute_svd(alpha * A)
        assert select_cutoff(svd) == l
        np.testing.assert_allclose(reconstruct_intensity(svd, T, g).values, alpha * I,
                                   rtol=1e-9)


# helpers ----------------------------------------------------------------

def test_default_interval_length():
    assert default_interval_length(441) == 111
    assert default_interval_length(4) == 1


def test_oracle_cutoff():
    assert oracle_cutoff([10.0, 5.0, 2.0, 1.0], 3.0) == 3
    with pytest.raises(ValueError):
        oracle_cutoff([10.0, 5.0], 1.0)


def test_normalization_and_error():
    np.testing.assert_allclose(normalize_minmax([2.0, 4.0, 3.0]), [0, 1, 0.5])
    assert not normalize_minmax([1.0, 1.0]).any()
    truth = np.array([0.0, 1.0, 2.0])
    assert normalized_error(10 * truth + 3, truth) == 0.0
    assert np.isclose(normalized_error([0.0, 1.0, 1.0], truth),
                      0.5 / np.sqrt(1.25))
    with pytest.raises(ValueError):
        normalized_error(truth, np.ones(3))
