import numpy as np
import pytest

from radwalk import NotPSD, ShapeMismatch
from radwalk.matrix_core import frobenius_inner, frobenius_norm, gram, psd_sqrt, sym_eig

from helpers import frobenius_loop, gram_loop, householder_orthogonal, random_psd


def test_gram_column_vector():
    assert np.array_equal(gram([[3.0], [4.0]]), [[25.0]])


def test_gram_orthonormal_columns():
    rng = np.random.default_rng(11)
    a = householder_orthogonal(6, rng)[:, :3]
    assert np.abs(gram(a) - np.eye(3)).max() < 1e-12


def test_gram_matches_double_loop():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((5, 2))
    assert np.abs(gram(x) - gram_loop(x)).max() < 1e-13


def test_gram_is_bitwise_symmetric():
    rng = np.random.default_rng(13)
    g = gram(rng.standard_normal((7, 4)))
    assert np.array_equal(g, g.T)


def test_gram_orthogonal_invariance():
    rng = np.random.default_rng(14)
    for _ in range(50):
        x = rng.standard_normal((8, 3))
        a = householder_orthogonal(8, rng)
        assert frobenius_norm(gram(a @ x) - gram(x)) < 1e-9


def test_gram_rejects_nonfinite():
    with pytest.raises(ValueError):
        gram(np.array([[np.nan, 1.0]]))


def test_psd_sqrt_identity():
    assert np.allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-14)


def test_psd_sqrt_diagonal():
    assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-13)


def test_psd_sqrt_recovers_root():
    rng = np.random.default_rng(15)
    for _ in range(20):
        r = random_psd(4, rng)
        assert frobenius_norm(psd_sqrt(r @ r) - r) < 1e-9


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(NotPSD):
        psd_sqrt(np.diag([1.0, -1.0]))


def test_psd_sqrt_clamps_rounding_noise():
    s = np.diag([1.0, -1e-14])
    r = psd_sqrt(s)
    assert np.all(np.linalg.eigvalsh(r) >= 0.0)


def test_psd_sqrt_idempotent_under_squaring():
    rng = np.random.default_rng(16)
    for _ in range(1000):
        dim = int(rng.integers(1, 7))
        s = random_psd(dim, rng, scale=float(rng.uniform(0.1, 10.0)))
        r = psd_sqrt(s)
        assert frobenius_norm(r @ r - s) <= 1e-9 * max(1.0, frobenius_norm(s))


def test_sym_eig_diagonal():
    w, v = sym_eig(np.diag([5.0, 1.0]))
    assert np.allclose(w, [5.0, 1.0])
    assert np.allclose(np.abs(v), np.eye(2), atol=1e-14)


def test_sym_eig_identity():
    w, _ = sym_eig(np.eye(4))
    assert np.allclose(w, np.ones(4))


def test_sym_eig_reconstruction_and_orthogonality():
    rng = np.random.default_rng(17)
    for _ in range(50):
        s = rng.standard_normal((4, 4))
        s = (s + s.T) / 2.0
        w, v = sym_eig(s)
        assert np.all(np.diff(w) <= 0)  # descending
        assert frobenius_norm((v * w) @ v.T - s) < 1e-9 * max(1.0, frobenius_norm(s))
        assert np.abs(v.T @ v - np.eye(4)).max() < 1e-12


def test_sym_eig_rejects_nonsquare():
    with pytest.raises(ShapeMismatch):
        sym_eig(np.ones((2, 3)))


def test_frobenius_inner_self_is_squared_norm():
    rng = np.random.default_rng(18)
    x = rng.standard_normal((3, 3))
    v = frobenius_inner(x, x)
    assert v >= 0.0
    assert np.isclose(v, frobenius_norm(x) ** 2)


def test_frobenius_inner_identity_pair():
    assert frobenius_inner(np.eye(2), np.eye(2)) == 2.0


def test_frobenius_inner_matches_sequential_loop():
    # sequential row-major accumulation is part of the contract
    rng = np.random.default_rng(19)
    for shape in [(2, 4), (1, 3), (5, 2), (17, 23)]:
        x = rng.standard_normal(shape)
        y = rng.standard_normal(shape)
        assert frobenius_inner(x, y) == frobenius_loop(x, y)


def test_frobenius_inner_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        frobenius_inner(np.ones((2, 2)), np.ones((2, 3)))
