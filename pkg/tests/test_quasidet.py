import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdsolitons.quasidet import (
    QuasideterminantError,
    assemble_blocks,
    block_quasidet,
    commutative_ratio,
    quasideterminant,
)


def test_scalar_example():
    X = [[1, 2], [3, 4]]
    assert quasideterminant(X, 1, 1) == pytest.approx(-2)
    # ratio form: (-1)^(2+2) det X / det X^{22} = -2 / 1
    assert commutative_ratio(np.array(X), 1, 1) == pytest.approx(-2)
    assert commutative_ratio(np.array(X), 0, 0) == pytest.approx(-0.5)
    assert quasideterminant(X, 0, 0) == pytest.approx(-0.5)


def test_identity():
    for N in (1, 2, 4):
        for i in range(N):
            assert quasideterminant(np.eye(N), i, i, block_size=1) == pytest.approx(1)
            assert commutative_ratio(np.eye(N), i, i) == pytest.approx(1)


def test_identity_block_case(rng):
    B, C, D = (rng.normal(size=(2, 2)) for _ in range(3))
    got = quasideterminant([[np.eye(2), B], [C, D]], 1, 1)
    assert np.allclose(got, D - C @ B, atol=1e-14)
    assert np.allclose(block_quasidet(np.eye(2), B, C, D), D - C @ B, atol=0)


def test_block_quasidet_trivial(rng):
    D = rng.normal(size=(3, 3))
    assert np.array_equal(block_quasidet(np.eye(4), np.zeros((4, 3)), np.zeros((3, 4)), D), D)


def test_block_quasidet_matches_assembled(rng):
    for _ in range(10):
        n, N = 2, 3
        flat = rng.normal(size=(N * n, N * n)) + 1j * rng.normal(size=(N * n, N * n))
        k = (N - 1) * n
        A, B, C, D = flat[:k, :k], flat[:k, k:], flat[k:, :k], flat[k:, k:]
        assert np.abs(block_quasidet(A, B, C, D) - quasideterminant(flat, N - 1, N - 1, block_size=n)).max() < 1e-11


def test_random_scalar_all_positions(rng):
    X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    for i in range(4):
        for j in range(4):
            assert abs(quasideterminant(X, i, j, block_size=1) - commutative_ratio(X, i, j)) < 1e-12 * max(1, abs(commutative_ratio(X, i, j)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_relabeling_invariance(seed, N):
    # permuting the non-expansion block rows and columns together leaves |X|_{NN} unchanged
    rng = np.random.default_rng(seed)
    n = 2
    X = rng.normal(size=(N * n, N * n)) + 1j * rng.normal(size=(N * n, N * n))
    perm = np.r_[rng.permutation(N - 1), N - 1]
    idx = np.concatenate([np.arange(p * n, (p + 1) * n) for p in perm])
    a = quasideterminant(X, N - 1, N - 1, block_size=n)
    b = quasideterminant(X[np.ix_(idx, idx)], N - 1, N - 1, block_size=n)
    assert np.abs(a - b).max() < 1e-11 * max(1, np.abs(a).max())


def test_singular_minor_reported():
    X = np.array([[0.0, 1.0], [1.0, 5.0]])
    with pytest.raises(QuasideterminantError, match=r"\(1, 1\)"):
        quasideterminant(X, 1, 1, block_size=1)
    with pytest.raises(QuasideterminantError):
        commutative_ratio(X, 1, 1)
    with pytest.raises(QuasideterminantError):
        block_quasidet(np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2))


def test_mixed_blocks_rejected():
    with pytest.raises(TypeError):
        assemble_blocks([[1.0, np.eye(2)], [np.eye(2), np.eye(2)]])
    with pytest.raises(TypeError):
        assemble_blocks([[np.eye(2), np.eye(3)], [np.eye(2), np.eye(2)]])


def test_batched_flat_input(rng):
    X = rng.normal(size=(5, 3, 3))
    got = quasideterminant(X, 2, 2, block_size=1)
    for b in range(5):
        assert got[b] == pytest.approx(commutative_ratio(X[b], 2, 2), rel=1e-12)
