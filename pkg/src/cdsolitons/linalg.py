"""Small dense complex matrix arithmetic.

Every routine accepts either a single ``(n, n)`` matrix or a stack of them
with arbitrary leading batch axes ``(..., n, n)``; grids of field samples are
evaluated as one stack.
"""

import numpy as np

# pivot threshold relative to the largest entry of the input
PIVOT_RTOL = 1e-12


class SingularMatrixError(ValueError):
    """Raised when elimination meets a pivot below the scale-aware threshold."""

    def __init__(self, message, smallest_pivot=None, index=None):
        super().__init__(message)
        self.smallest_pivot = smallest_pivot
        self.index = index


def as_complex_matrix(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def mat_mul(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def dagger(a):
    return np.conj(np.swapaxes(np.asarray(a), -1, -2))


def commutator(a, b):
    # plain loops, not BLAS: fused multiply-adds would break exact
    # cancellation for commuting inputs
    return np.einsum("...ij,...jk->...ik", a, b) - np.einsum("...ij,...jk->...ik", b, a)


def diag_exp(d):
    """Diagonal matrix (or stack of them) with entries ``exp(d_k)``."""
    d = np.asarray(d, dtype=complex)
    n = d.shape[-1]
    out = np.zeros(d.shape + (n,), dtype=complex)
    idx = np.arange(n)
    out[..., idx, idx] = np.exp(d)
    return out


def batched_solve(a, b, rtol=PIVOT_RTOL):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting.

    Returns ``(x, singular, min_pivot)``. ``singular`` flags the batch entries
    where some pivot fell below ``rtol`` times the largest initial entry
    magnitude; their ``x`` is NaN. ``min_pivot`` holds the smallest pivot
    magnitude met per entry.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    vector_rhs = b.ndim == a.ndim - 1
    if vector_rhs:
        b = b[..., None]
    m = a.shape[-1]
    batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    A = np.broadcast_to(a, batch + (m, m)).reshape(-1, m, m).copy()
    B = np.broadcast_to(b, batch + b.shape[-2:]).reshape(-1, m, b.shape[-1]).copy()
    nb = A.shape[0]
    rows = np.arange(nb)

    scale = np.abs(A).max(axis=(1, 2), initial=0.0)
    thresh = rtol * scale
    singular = ~np.isfinite(A).all(axis=(1, 2)) | (scale == 0.0)
    min_pivot = np.full(nb, np.inf)

    for k in range(m):
        p = np.argmax(np.abs(A[:, k:, k]), axis=1) + k
        swap = p != k
        if swap.any():
            r = rows[swap]
            pk = p[swap]
            A[r, k], A[r, pk] = A[r, pk].copy(), A[r, k].copy()
            B[r, k], B[r, pk] = B[r, pk].copy(), B[r, k].copy()
        piv = A[:, k, k]
        mag = np.abs(piv)
        min_pivot = np.minimum(min_pivot, mag)
        bad = ~(mag > thresh)
        singular |= bad
        piv = np.where(bad, 1.0, piv)
        if k + 1 < m:
            f = A[:, k + 1:, k] / piv[:, None]
            A[:, k + 1:, k:] -= f[:, :, None] * A[:, None, k, k:]
            B[:, k + 1:] -= f[:, :, None] * B[:, None, k]

    X = np.empty_like(B)
    for k in range(m - 1, -1, -1):
        acc = B[:, k] - np.einsum("bj,bjc->bc", A[:, k, k + 1:], X[:, k + 1:])
        piv = np.where(singular, 1.0, A[:, k, k])
        X[:, k] = acc / piv[:, None]
    X[singular] = np.nan

    X = X.reshape(batch + X.shape[-2:])
    if vector_rhs:
        X = X[..., 0]
    return X, singular.reshape(batch), min_pivot.reshape(batch)


def solve(a, b):
    x, singular, min_pivot = batched_solve(a, b)
    if singular.any():
        idx = tuple(int(i) for i in np.argwhere(singular)[0]) if singular.ndim else None
        raise SingularMatrixError(
            f"matrix singular to tolerance (smallest pivot {float(min_pivot[singular].min()):.3e})",
            smallest_pivot=float(min_pivot[singular].min()),
            index=idx,
        )
    return x


def batched_inv(a):
    a = np.asarray(a, dtype=complex)
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=complex), a.shape)
    return batched_solve(a, eye)


def mat_inv(a):
    """Inverse of a square matrix; raises :class:`SingularMatrixError`."""
    a = as_complex_matrix(a)
    return solve(a, np.broadcast_to(np.eye(a.shape[-1], dtype=complex), a.shape))


def det(a):
    return np.linalg.det(np.asarray(a, dtype=complex))
