"""The generalized coupled dispersionless system and its Lax pair.

Fields: a matrix field ``S(x, t)`` and a constant matrix ``G`` obeying

    S_xt - [[S, G], S_x] = 0,

the compatibility condition of ``psi_x = U psi``, ``psi_t = V psi`` with
``U = lam S_x`` and ``V = [S, G] + G / lam``.

Seeds are ``S = x K`` with ``K`` and ``G`` diagonal, so the vacuum
wavefunction is the diagonal exponential ``exp(lam x K + t G / lam)``.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import batched_solve, commutator, diag_exp
from .verify import FieldGrid, fd_partial, fd_report, pointwise_norm

# tolerance for the construction-time Lax check of the vacuum wavefunction
_PROBE_RTOL = 1e-6


class ConfigError(ValueError):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass(frozen=True)
class SystemConfig:
    n: int
    g_diag: tuple
    k_diag: tuple
    unitary_reduction: bool = False

    @property
    def G(self):
        return np.diag(np.asarray(self.g_diag, dtype=complex))

    @property
    def K(self):
        return np.diag(np.asarray(self.k_diag, dtype=complex))


def su2_config():
    """``K = i diag(1, -1)``, ``G = -(i/2) diag(1, -1)``: the seed q = x, r = 0."""
    return SystemConfig(2, (-0.5j, 0.5j), (1j, -1j), True)


def validate_config(c, atol=1e-12):
    problems = []
    g = np.asarray(c.g_diag, dtype=complex)
    k = np.asarray(c.k_diag, dtype=complex)
    if c.n < 1:
        problems.append("n must be positive")
    if g.shape != (c.n,) or k.shape != (c.n,):
        problems.append(f"g_diag and k_diag need {c.n} entries")
    else:
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(k))):
            problems.append("non-finite entries")
        if np.all(np.abs(k) <= atol):
            problems.append("K is zero")
        if c.unitary_reduction:
            if np.any(np.abs(g.real) > atol):
                problems.append("G is not anti-hermitian")
            if np.any(np.abs(k.real) > atol):
                problems.append("K is not anti-hermitian")
            if abs(g.sum()) > atol:
                problems.append("G is not traceless")
            if abs(k.sum()) > atol:
                problems.append("K is not traceless")
    if problems:
        raise ConfigError(problems)
    return c


def lax_matrices(S_val, Sx_val, G, lam):
    """``(U, V) = (lam S_x, [S, G] + G / lam)``."""
    if lam == 0:
        raise ValueError("spectral parameter must be non-zero")
    S_val = np.asarray(S_val, dtype=complex)
    G = np.asarray(G, dtype=complex)
    return lam * np.asarray(Sx_val, dtype=complex), commutator(S_val, G) + G / lam


@dataclass(frozen=True)
class SpectralStep:
    """One Darboux stage: eigenvalues ``lambdas`` and columns ``vectors[:, k]``."""

    lambdas: tuple
    vectors: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=complex)
        vec = np.asarray(self.vectors, dtype=complex)
        object.__setattr__(self, "lambdas", tuple(complex(v) for v in lam))
        object.__setattr__(self, "vectors", vec)
        vec.setflags(write=False)
        n = lam.size
        if vec.shape != (n, n):
            raise ValueError(f"need {n} column vectors of length {n}, got shape {vec.shape}")
        if np.any(lam == 0):
            raise ValueError("eigenvalues must be non-zero")
        if n > 1 and np.min(np.abs(lam[:, None] - lam[None, :]) + np.eye(n)) < 1e-10:
            raise ValueError("eigenvalues must be pairwise distinct")

    @property
    def n(self):
        return len(self.lambdas)

    @property
    def Lambda(self):
        return np.diag(np.asarray(self.lambdas))

    @classmethod
    def su2_pair(cls, lam, e1):
        """Stage ``{lam, -lam}`` with ``e2 = (-conj e1[1], conj e1[0])``.

        For imaginary ``lam`` this keeps S[1] anti-hermitian and traceless.
        """
        a, b = (complex(v) for v in e1)
        return cls((lam, -lam), np.array([[a, -np.conj(b)], [b, np.conj(a)]]))

    def check_reduction(self, atol=1e-12):
        problems = []
        lam = np.asarray(self.lambdas)
        if np.any(np.abs(lam.real) > atol):
            problems.append("eigenvalues are not pure imaginary")
        if abs(np.sum(1 / lam)) > atol:
            problems.append("inverse eigenvalues do not sum to zero")
        gram = self.vectors.conj().T @ self.vectors
        off = gram - np.diag(np.diag(gram))
        if np.max(np.abs(off), initial=0.0) > atol * max(1.0, np.abs(gram).max()):
            problems.append("stage vectors are not mutually orthogonal")
        return problems


@dataclass(frozen=True)
class Jet:
    """A matrix-valued sample with its first x- and t-derivatives."""

    v: np.ndarray
    x: np.ndarray
    t: np.ndarray


class SeedSolution:
    def __init__(self, config):
        self.config = validate_config(config)
        self.K = config.K
        self.G = config.G
        self.k = np.asarray(config.k_diag, dtype=complex)
        self.g = np.asarray(config.g_diag, dtype=complex)
        self._probe()

    @property
    def n(self):
        return self.config.n

    def S(self, x, t):
        x = np.asarray(x, dtype=float)
        return x[..., None, None] * self.K + 0 * np.asarray(t)[..., None, None]

    def S_jet(self, x, t):
        S = self.S(x, t)
        return Jet(S, np.broadcast_to(self.K, S.shape).copy(), np.zeros_like(S))

    def psi(self, lam, x, t):
        x = np.asarray(x, dtype=float)[..., None]
        t = np.asarray(t, dtype=float)[..., None]
        return diag_exp(lam * x * self.k + t * self.g / lam)

    def psi_jet(self, lam, x, t):
        p = self.psi(lam, x, t)
        return Jet(p, lam * self.K @ p, self.G @ p / lam)

    def _probe(self):
        h = 1e-5
        lam = 0.7 + 0.3j
        for x in (-1.0, 0.0, 1.0):
            for t in (-1.0, 0.0, 1.0):
                p = self.psi(lam, x, t)
                px = (self.psi(lam, x + h, t) - self.psi(lam, x - h, t)) / (2 * h)
                pt = (self.psi(lam, x, t + h) - self.psi(lam, x, t - h)) / (2 * h)
                U, V = lax_matrices(self.S(x, t), self.K, self.G, lam)
                scale = max(1.0, np.abs(p).max())
                if np.abs(px - U @ p).max() > _PROBE_RTOL * scale or np.abs(pt - V @ p).max() > _PROBE_RTOL * scale:
                    raise RuntimeError(f"vacuum wavefunction fails the Lax pair at ({x}, {t})")


def vacuum_seed(config):
    return SeedSolution(config)


def eigenfunctions(seed, step):
    """Return ``theta(x, t)`` whose k-th column is ``psi(lam_k) e_k``.

    The returned callable yields a :class:`Jet`; invertibility is checked
    by consumers at the points they evaluate.
    """
    if step.n != seed.n:
        raise ValueError(f"stage dimension {step.n} does not match system dimension {seed.n}")
    lam = np.asarray(step.lambdas)
    e = step.vectors

    def theta(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        # psi is diagonal, so psi(lam_k) e_k is an elementwise product
        d = np.exp(lam[None, :] * x[..., None, None] * seed.k[:, None] + t[..., None, None] * seed.g[:, None] / lam[None, :])
        v = d * e
        return Jet(v, seed.k[:, None] * lam[None, :] * v, seed.g[:, None] / lam[None, :] * v)

    return theta


def orthogonality(seed, step, x, t):
    """``|theta_i^dag theta_j|`` for every pair, flagged by conjugate pairing.

    Returns ``(values, paired)``: ``values[..., i, j]`` and a boolean matrix
    marking the pairs with ``lam_j == conj(lam_i)``, the only pairs for which
    the product is constant (and zero for orthogonal vectors).
    """
    th = eigenfunctions(seed, step)(x, t).v
    gram = np.conj(np.swapaxes(th, -1, -2)) @ th
    lam = np.asarray(step.lambdas)
    paired = np.abs(lam[None, :] - np.conj(lam[:, None])) < 1e-10
    np.fill_diagonal(paired, False)
    return np.abs(gram), paired


def _eom(G):
    def residual(S):
        Sx = fd_partial(S, "x")
        Sxt = fd_partial(S, "xt")
        SG = commutator(S.samples, G)
        r = Sxt.samples - commutator(SG, Sx.samples)
        return FieldGrid(S.grid, pointwise_norm(r), Sx.mask | Sxt.mask)

    return residual


def eom_residual(S_grid, G, tolerance=None):
    """Max interior Frobenius norm of ``S_xt - [[S, G], S_x]``."""
    return fd_report("eom", _eom(np.asarray(G, dtype=complex)), (S_grid,), tolerance)


def zc_residual(U, V):
    Ut = fd_partial(U, "t")
    Vx = fd_partial(V, "x")
    r = Ut.samples - Vx.samples + commutator(U.samples, V.samples)
    return FieldGrid(U.grid, pointwise_norm(r), Ut.mask | Vx.mask)


def zero_curvature_residual(U_grid, V_grid, tolerance=None):
    """Max interior Frobenius norm of ``U_t - V_x + [U, V]``."""
    if U_grid.grid != V_grid.grid:
        raise ValueError("U and V live on different grids")
    return fd_report("zero_curvature", zc_residual, (U_grid, V_grid), tolerance)


def inverse_with_mask(a):
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=complex), a.shape)
    inv, singular, _ = batched_solve(a, eye)
    return inv, singular
