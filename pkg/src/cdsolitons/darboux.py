"""Matrix Darboux transformations and their quasideterminant closed forms.

One stage with eigenfunction matrix ``Theta`` and eigenvalues ``Lambda``
dresses the system by

    M = Theta Lambda^{-1} Theta^{-1},   S -> S - M,   psi -> (1/lam - M) psi,

with ``G`` untouched. The N-fold result is evaluated two ways: by iterating
stages (dressing later eigenfunctions with earlier Darboux matrices), and
by a single block quasideterminant built from undressed seed data.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import commutator
from .model import Jet, SpectralStep, eigenfunctions, inverse_with_mask
from .quasidet import block_quasidet_batched
from .verify import FieldGrid, fd_partial, fd_report, pointwise_norm

COLLISION_TOL = 1e-10


class SpectralCollisionError(ValueError):
    pass


@dataclass
class StageSample:
    S_prev: Jet  # the field this stage transforms
    M: Jet


@dataclass
class DressedSample:
    S: np.ndarray
    Sx: np.ndarray
    St: np.ndarray
    stages: list
    pole: np.ndarray

    @property
    def M(self):
        return [s.M.v for s in self.stages]


def build_M(theta, Lambda):
    """``Theta Lambda^{-1} Theta^{-1}``; raises on singular input."""
    from .linalg import mat_inv

    theta = np.asarray(theta, dtype=complex)
    lam = np.diag(np.asarray(Lambda, dtype=complex))
    if np.any(lam == 0):
        raise ValueError("Lambda is singular")
    return (theta / lam) @ mat_inv(theta)


def _check_stages(seed, stages):
    stages = list(stages)
    for k, st in enumerate(stages):
        if st.n != seed.n:
            raise ValueError(f"stage {k} has dimension {st.n}, system has {seed.n}")
    lams = np.concatenate([np.asarray(s.lambdas) for s in stages]) if stages else np.zeros(0)
    if lams.size > 1:
        d = np.abs(lams[:, None] - lams[None, :]) + np.eye(lams.size)
        if d.min() < COLLISION_TOL:
            raise SpectralCollisionError("eigenvalues repeat across stages")
    return stages


class SolutionHandle:
    """S[N] and psi[N] of the seed dressed by ``stages`` in order."""

    def __init__(self, seed, stages):
        self.seed = seed
        self.stages = _check_stages(seed, stages)
        self._thetas = [eigenfunctions(seed, st) for st in self.stages]

    @property
    def order(self):
        return len(self.stages)

    @property
    def G(self):
        return self.seed.G

    def evaluate(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        x, t = np.broadcast_arrays(x, t)
        S = self.seed.S_jet(x, t)
        pole = np.zeros(x.shape, dtype=bool)
        thetas = [th(x, t) for th in self._thetas]
        out = []
        for j, st in enumerate(self.stages):
            th = thetas[j]
            linv = 1.0 / np.asarray(st.lambdas)
            inv, singular = inverse_with_mask(th.v)
            pole |= singular
            M = (th.v * linv) @ inv
            Mx = (th.x * linv) @ inv - M @ th.x @ inv
            Mt = (th.t * linv) @ inv - M @ th.t @ inv
            Mj = Jet(M, Mx, Mt)
            out.append(StageSample(S, Mj))
            S = Jet(S.v - M, S.x - Mx, S.t - Mt)
            for k in range(j + 1, len(self.stages)):
                tk = thetas[k]
                lk = 1.0 / np.asarray(self.stages[k].lambdas)
                thetas[k] = Jet(
                    tk.v * lk - M @ tk.v,
                    tk.x * lk - Mx @ tk.v - M @ tk.x,
                    tk.t * lk - Mt @ tk.v - M @ tk.t,
                )
        pole |= ~np.isfinite(S.v).all(axis=(-1, -2))
        return DressedSample(S.v, S.x, S.t, out, pole)

    def S(self, x, t):
        ev = self.evaluate(x, t)
        return np.where(ev.pole[..., None, None], np.nan, ev.S)

    def psi(self, lam, x, t):
        """psi[N](lam) by applying each stage's Darboux matrix in turn."""
        _check_collision(self.stages, lam)
        ev = self.evaluate(x, t)
        p = self.seed.psi(lam, np.broadcast_to(x, ev.pole.shape), np.broadcast_to(t, ev.pole.shape))
        for s in ev.stages:
            p = p / lam - s.M.v @ p
        return np.where(ev.pole[..., None, None], np.nan, p)


def darboux_iterate(seed, stages):
    return SolutionHandle(seed, stages)


def darboux_step(S_fn, psi_fn, stage):
    """One Darboux stage applied to arbitrary field callables.

    ``psi_fn(lam, x, t)`` must solve the Lax pair of ``S_fn``; the stage's
    eigenfunction matrix is built from it. Returns ``(S1_fn, psi1_fn)``.
    """
    lam = np.asarray(stage.lambdas)
    e = stage.vectors

    def M_fn(x, t):
        cols = [psi_fn(l, x, t) @ e[:, k] for k, l in enumerate(lam)]
        th = np.stack(cols, axis=-1)
        inv, _ = inverse_with_mask(th)
        return (th / lam) @ inv

    def S1(x, t):
        return S_fn(x, t) - M_fn(x, t)

    def psi1(l, x, t):
        _check_collision([stage], l)
        return psi_fn(l, x, t) / l - M_fn(x, t) @ psi_fn(l, x, t)

    return S1, psi1


def _check_collision(stages, lam):
    for st in stages:
        if np.any(np.abs(np.asarray(st.lambdas) - lam) < COLLISION_TOL):
            raise SpectralCollisionError(f"spectral parameter {lam} collides with a stage eigenvalue")


def _theta_rows(seed, stages, x, t, rows):
    """Block rows ``[Theta_1^{(r)} ... Theta_N^{(r)}]`` for r in ``rows``."""
    blocks = []
    thetas = [eigenfunctions(seed, st)(x, t).v for st in stages]
    for r in rows:
        blocks.append([th * np.asarray(st.lambdas) ** (-r) for th, st in zip(thetas, stages)])
    return [np.concatenate(b, axis=-1) for b in blocks]


def quasidet_S(seed, stages):
    """Evaluator of S[N] as ``S + |Theta-powers ; O..O I ; boxed O|``.

    Returns ``f(x, t) -> (S_N, pole)``.
    """
    stages = _check_stages(seed, stages)
    N = len(stages)
    n = seed.n

    def evaluate(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        S = seed.S(x, t)
        if N == 0:
            return S, np.zeros(x.shape, dtype=bool)
        rows = _theta_rows(seed, stages, x, t, range(N + 1))
        A = np.concatenate(rows[:N], axis=-2)
        C = rows[N]
        B = np.zeros(x.shape + (N * n, n), dtype=complex)
        B[..., (N - 1) * n:, :] = np.eye(n)
        D = np.zeros(x.shape + (n, n), dtype=complex)
        Q, singular = block_quasidet_batched(A, B, C, D)
        return np.where(singular[..., None, None], np.nan, S + Q), singular

    return evaluate


def quasidet_psi(seed, stages, lam):
    """Evaluator of psi[N](lam) as the quasideterminant with boxed psi^{(N)}."""
    stages = _check_stages(seed, stages)
    _check_collision(stages, lam)
    N = len(stages)

    def evaluate(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        p = seed.psi(lam, x, t)
        if N == 0:
            return p, np.zeros(x.shape, dtype=bool)
        rows = _theta_rows(seed, stages, x, t, range(N + 1))
        A = np.concatenate(rows[:N], axis=-2)
        B = np.concatenate([p * lam ** (-r) for r in range(N)], axis=-2)
        Q, singular = block_quasidet_batched(A, B, rows[N], p * lam ** (-N))
        return np.where(singular[..., None, None], np.nan, Q), singular

    return evaluate


# (m1), (m2) ----------------------------------------------------------------


def _m_residuals(G):
    SG_of = lambda S: commutator(S, G)

    def m1(M, S):
        Mx = fd_partial(M, "x")
        Sx = fd_partial(S, "x")
        r = Mx.samples @ M.samples - commutator(Sx.samples, M.samples)
        return FieldGrid(M.grid, pointwise_norm(r), Mx.mask | Sx.mask)

    def m2(M, S):
        Mt = fd_partial(M, "t")
        r = Mt.samples - commutator(SG_of(S.samples), M.samples) - commutator(G, M.samples) @ M.samples
        return FieldGrid(M.grid, pointwise_norm(r), Mt.mask)

    return m1, m2


def m_condition_residuals(M_grid, S_grid, G, tolerance=None):
    """FD residuals of ``M_x M = [S_x, M]`` and ``M_t = [[S,G],M] + [G,M] M``.

    ``S_grid`` is the field the stage transforms. Returns ``(m1, m2)``
    reports.
    """
    m1, m2 = _m_residuals(np.asarray(G, dtype=complex))
    return (
        fd_report("m1", m1, (M_grid, S_grid), tolerance),
        fd_report("m2", m2, (M_grid, S_grid), tolerance),
    )


def m_condition_defects(M, S, G):
    """Pointwise (m1), (m2) defects from analytic jets ``M`` and ``S``."""
    G = np.asarray(G, dtype=complex)
    d1 = M.x @ M.v - commutator(S.x, M.v)
    d2 = M.t - commutator(commutator(S.v, G), M.v) - commutator(G, M.v) @ M.v
    return np.linalg.norm(d1, axis=(-2, -1)), np.linalg.norm(d2, axis=(-2, -1))


def sample_stage_grids(handle, grid, stage_index=0, shift=0.0):
    """FieldGrids ``(M, S_prev)`` of one stage; ``shift`` adds ``shift * I`` to M."""
    X, T = grid.mesh()
    ev = handle.evaluate(X, T)
    s = ev.stages[stage_index]
    M = s.M.v + shift * np.eye(handle.seed.n)
    return FieldGrid(grid, M, ev.pole), FieldGrid(grid, s.S_prev.v, ev.pole)


def sample_S(handle, grid):
    X, T = grid.mesh()
    ev = handle.evaluate(X, T)
    return FieldGrid(grid, ev.S, ev.pole)


def sample_lax(handle, grid, lam):
    """FieldGrids of the dressed pair ``U = lam S_x``, ``V = [S, G] + G/lam``."""
    X, T = grid.mesh()
    ev = handle.evaluate(X, T)
    G = handle.G
    U = lam * ev.Sx
    V = commutator(ev.S, G) + G / lam
    return FieldGrid(grid, U, ev.pole), FieldGrid(grid, V, ev.pole)


__all__ = [
    "SpectralStep",
    "SolutionHandle",
    "build_M",
    "darboux_step",
    "darboux_iterate",
    "quasidet_S",
    "quasidet_psi",
    "m_condition_residuals",
    "m_condition_defects",
]
