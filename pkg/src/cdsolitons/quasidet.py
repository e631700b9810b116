"""Quasideterminants over complex scalars or equal-size complex matrix blocks.

A block matrix is stored flat: an ``(N*n, N*n)`` array together with its block
size ``n``. Scalar entries are the ``n = 1`` case. Indices are 0-based.
"""

import numbers

import numpy as np

from .linalg import SingularMatrixError, batched_solve


class QuasideterminantError(SingularMatrixError):
    pass


def assemble_blocks(blocks):
    """Flatten a nested list of ring elements into ``(flat, block_size)``.

    All entries must be of one kind: either all scalars, or all square
    matrices of the same size. Mixed kinds are rejected, not promoted.
    """
    rows = [list(r) for r in blocks]
    N = len(rows)
    if N == 0 or any(len(r) != N for r in rows):
        raise ValueError("block matrix must be square and non-empty")
    scalar = [isinstance(e, numbers.Number) or np.ndim(e) == 0 for r in rows for e in r]
    if all(scalar):
        return np.array(rows, dtype=complex), 1
    if any(scalar):
        raise TypeError("mixed scalar and matrix blocks")
    shapes = {np.shape(e) for r in rows for e in r}
    if len(shapes) != 1:
        raise TypeError(f"blocks of unequal shapes: {sorted(shapes)}")
    (shape,) = shapes
    if len(shape) != 2 or shape[0] != shape[1]:
        raise TypeError(f"blocks must be square matrices, got {shape}")
    return np.block([[np.asarray(e, dtype=complex) for e in r] for r in rows]), shape[0]


def _split(X, i, j, n):
    N = X.shape[-1] // n
    if X.shape[-1] != N * n or X.shape[-2] != X.shape[-1]:
        raise ValueError(f"shape {X.shape} is not a square grid of {n}x{n} blocks")
    if not (0 <= i < N and 0 <= j < N):
        raise IndexError(f"expansion point ({i}, {j}) outside {N}x{N} block matrix")
    keep_r = np.concatenate([np.arange(k * n, (k + 1) * n) for k in range(N) if k != i] or [np.arange(0)])
    keep_c = np.concatenate([np.arange(k * n, (k + 1) * n) for k in range(N) if k != j] or [np.arange(0)])
    ri = np.arange(i * n, (i + 1) * n)
    cj = np.arange(j * n, (j + 1) * n)
    A = X[..., keep_r[:, None], keep_c]
    B = X[..., keep_r[:, None], cj]
    C = X[..., ri[:, None], keep_c]
    D = X[..., ri[:, None], cj]
    return A, B, C, D


def block_quasidet_batched(A, B, C, D):
    """``D - C A^{-1} B`` over batch axes; returns ``(value, singular)``."""
    D = np.asarray(D, dtype=complex)
    if np.shape(A)[-1] == 0:
        return D.copy(), np.zeros(D.shape[:-2], dtype=bool)
    Y, singular, _ = batched_solve(A, B)
    return D - np.asarray(C) @ Y, singular


def block_quasidet(A, B, C, D):
    """Quasideterminant expanded about the block ``D``: ``D - C A^{-1} B``."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    C = np.asarray(C, dtype=complex)
    D = np.asarray(D, dtype=complex)
    if A.shape[-1] != A.shape[-2] or B.shape[-2] != A.shape[-1] or C.shape[-1] != A.shape[-2]:
        raise ValueError("non-conformable blocks")
    value, singular = block_quasidet_batched(A, B, C, D)
    if singular.any():
        raise QuasideterminantError("block A is singular to tolerance")
    return value


def quasideterminant(X, i, j, block_size=None):
    """``|X|_{ij} = x_ij - r_i^j (X^{ij})^{-1} c_j^i``.

    ``X`` is either a nested list of blocks, or an already flat array (with
    optional leading batch axes) whose block size is ``block_size``. Scalar
    block matrices return scalars.
    """
    if block_size is None:
        X, block_size = assemble_blocks(X)
    X = np.asarray(X, dtype=complex)
    A, B, C, D = _split(X, i, j, block_size)
    value, singular = block_quasidet_batched(A, B, C, D)
    if singular.any():
        raise QuasideterminantError(
            f"submatrix X^{{{i}{j}}} is singular at expansion point ({i}, {j})"
        )
    if block_size == 1:
        return value[..., 0, 0]
    return value


def commutative_ratio(X, i, j):
    """``(-1)^(i+j) det X / det X^{ij}`` for scalar entries."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("expected a square scalar matrix")
    minor = np.delete(np.delete(X, i, axis=0), j, axis=1)
    dm = np.linalg.det(minor) if minor.size else 1.0
    if abs(dm) == 0.0:
        raise QuasideterminantError(f"minor ({i}, {j}) has vanishing determinant")
    return (-1) ** (i + j) * np.linalg.det(X) / dm
