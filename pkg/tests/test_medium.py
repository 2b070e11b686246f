import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynoct.errors import OutOfSupportError
from dynoct.medium import (
    MetabolicMap,
    PixelGrid,
    build_medium,
    collagen_density,
    default_phantom,
    generate_collagen_field,
    metabolic_block,
    metabolic_density,
    padded_half_width,
)


@given(st.integers(1, 30), st.integers(1, 30), st.data())
def test_grid_flatten_roundtrip(rows, cols, data):
    g = PixelGrid(rows, cols)
    r = data.draw(st.integers(0, rows - 1))
    c = data.draw(st.integers(0, cols - 1))
    j = g.flatten(r, c)
    assert j == r * cols + c
    assert g.unflatten(j) == (r, c)


def test_grid_rejects_bad_shapes():
    with pytest.raises(ValueError):
        PixelGrid(0, 3)
    with pytest.raises(IndexError):
        PixelGrid(2, 2).flatten(2, 0)


def test_field_is_deterministic():
    g = PixelGrid(2, 3)
    a = generate_collagen_field(g, 200, 0.1, 0.0, seed=7)
    b = generate_collagen_field(g, 200, 0.1, 0.0, seed=7)
    c = generate_collagen_field(g, 200, 0.1, 0.0, seed=8)
    assert np.array_equal(a.q, b.q)
    assert not np.allclose(a.q, c.q)


def test_field_pixels_are_independent_streams():
    # pixel 0 must not depend on how many pixels the grid has
    small = generate_collagen_field(PixelGrid(1, 1), 100, 0.1, 0.0, seed=3)
    big = generate_collagen_field(PixelGrid(4, 4), 100, 0.1, 0.0, seed=3)
    assert np.array_equal(small.q[0], big.q[0])


@pytest.mark.parametrize("kw", [dict(z_count=1), dict(corr_len=-1.0), dict(seed=-1)])
def test_field_rejects_bad_arguments(kw):
    args = dict(z_count=50, corr_len=0.1, v0=0.0, seed=1)
    args.update(kw)
    with pytest.raises(ValueError):
        generate_collagen_field(PixelGrid(1, 1), **args)


def test_white_field_is_uncorrelated():
    f = generate_collagen_field(PixelGrid(1, 1), 200_000, 0.0, 0.0, seed=11)
    q = f.q[0]
    r1 = np.mean(q[:-1] * q[1:]) / np.mean(q * q)
    assert abs(r1) < 0.01


def test_field_autocovariance_monte_carlo():
    # lag equal to the correlation length, 100 seeds, 10^4 samples each
    nz, lag = 10_000, 5
    half = 0.5 * (nz - 1) * 0.01
    est = []
    for seed in range(100):
        f = generate_collagen_field(PixelGrid(1, 1), nz, lag * 0.01, 0.0, seed, half_width=half)
        q = f.q[0]
        est.append(np.mean(q[:-lag] * q[lag:]))
    expected = np.exp(-0.5)
    assert abs(np.mean(est) - expected) < 0.15 * expected


def test_field_is_stationary():
    f = generate_collagen_field(PixelGrid(20, 20), 400, 0.2, 0.0, seed=5, half_width=2.0)
    q = f.q
    for cols in (slice(0, 40), slice(180, 220), slice(360, 400)):
        block = q[:, cols]
        assert abs(block.mean()) < 0.1
        assert abs(block.var() - 1.0) < 0.15


def test_density_at_nodes_and_shift_identity():
    f = generate_collagen_field(PixelGrid(1, 2), 401, 0.1, 0.01, seed=2, half_width=2.0)
    z = f.z_samples[50:350]
    assert np.array_equal(collagen_density(f, 1, z, 0.0), f.q[1, 50:350])
    t = 7.0
    lhs = collagen_density(f, 0, z, t)
    rhs = collagen_density(f, 0, z - f.v0 * t, 0.0)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_density_frozen_without_drift():
    f = generate_collagen_field(PixelGrid(1, 1), 201, 0.1, 0.0, seed=2)
    z = np.linspace(-0.9, 0.9, 33)
    assert np.array_equal(collagen_density(f, 0, z, 0.0), collagen_density(f, 0, z, 123.0))


def test_density_out_of_support():
    f = generate_collagen_field(PixelGrid(1, 1), 201, 0.1, 0.5, seed=2)
    with pytest.raises(OutOfSupportError):
        collagen_density(f, 0, 0.9, -1.0)


def test_padding_covers_the_acquisition():
    L, v0, T = 1.0, 4e-4, 500.0
    mmap = default_phantom(PixelGrid(3, 3))
    med = build_medium(mmap, L=L, corr_len=0.2, v0=v0, t_total=T, dz=0.02, seed=1)
    assert med.collagen.z_max >= padded_half_width(L, v0, T, 0.2) - 1e-12
    z = np.linspace(-L, L, 101)
    collagen_density(med.collagen, 0, z[:, None], np.array([0.0, T])[None, :])


def test_metabolic_silent_pixel_is_zero():
    mmap = MetabolicMap(PixelGrid(1, 2), np.array([0.0, 1.0]))
    assert metabolic_density(mmap, 0, 3, 4, seed=1) == 0.0
    assert not metabolic_block(mmap, 0, 5, 6, seed=1).any()


def test_metabolic_variance():
    m, b = 0.8, 0.3
    mmap = MetabolicMap(PixelGrid(1, 1), np.array([m]), b)
    draws = metabolic_block(mmap, 0, 100, 1000, seed=4).ravel()
    assert abs(draws.var() / (m * m + b * b) - 1) < 0.05


def test_metabolic_independence():
    mmap = MetabolicMap(PixelGrid(1, 2), np.array([1.0, 1.0]))
    a = metabolic_block(mmap, 0, 10, 1000, seed=4)
    b = metabolic_block(mmap, 1, 10, 1000, seed=4)
    n = a.size
    bound = 3 / np.sqrt(n)
    assert abs(np.corrcoef(a.ravel(), b.ravel())[0, 1]) < bound
    # neighbouring depths and times
    assert abs(np.corrcoef(a[:-1].ravel(), a[1:].ravel())[0, 1]) < 3 / np.sqrt(a[1:].size)
    assert abs(np.corrcoef(a[:, :-1].ravel(), a[:, 1:].ravel())[0, 1]) < 3 / np.sqrt(a[:, 1:].size)


def test_metabolic_block_matches_single_draws():
    mmap = MetabolicMap(PixelGrid(1, 3), np.array([0.2, 1.5, 0.7]), 0.05)
    block = metabolic_block(mmap, 1, 4, 6, seed=9)
    for zi in range(4):
        for ti in range(6):
            assert block[zi, ti] == metabolic_density(mmap, 1, zi, ti, seed=9)


def test_metabolic_map_validation():
    with pytest.raises(ValueError):
        MetabolicMap(PixelGrid(1, 2), np.array([1.0, -0.1]))
    with pytest.raises(ValueError):
        MetabolicMap(PixelGrid(1, 2), np.array([1.0]))


@settings(max_examples=20, deadline=None)
@given(st.integers(5, 40))
def test_phantom_shape_and_levels(n):
    ph = default_phantom(PixelGrid(n, n))
    assert ph.m.shape == (n * n,)
    assert set(np.unique(ph.m)) <= {0.0, 0.5, 0.75, 1.0}
    assert ph.m.max() == 1.0
