import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from reward_lab.streams import hash_indices, normals, uniforms


def test_same_key_same_draws():
    assert np.array_equal(uniforms(5, 3, np.arange(8), draws=4), uniforms(5, 3, np.arange(8), draws=4))


def test_elementwise_independent_of_batch_shape():
    full = uniforms(1, np.arange(100), draws=3)
    single = np.stack([uniforms(1, i, draws=3) for i in range(100)])
    assert np.array_equal(full, single)
    assert np.array_equal(full[::-1], uniforms(1, np.arange(100)[::-1], draws=3))


def test_distinct_seeds_and_indices_differ():
    assert hash_indices(0, 1) != hash_indices(1, 1)
    assert hash_indices(0, 1, 2) != hash_indices(0, 2, 1)


@given(st.integers(0, 2**31), st.integers(0, 10_000))
def test_open_unit_interval(seed, step):
    u = uniforms(seed, step, np.arange(64), draws=4)
    assert u.shape == (64, 4)
    assert np.all((u > 0) & (u < 1))
    assert np.all(np.isfinite(normals(u)))


def test_moments():
    u = uniforms(42, np.arange(200_000), draws=1).ravel()
    assert abs(u.mean() - 0.5) < 0.003
    z = normals(u)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    # lag-1 correlation along the counter
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.01
