"""Finite-difference verification harness.

Samples live on a uniform ``(nt, nx)`` grid, t-major. Derivatives use
second-order central stencils; the boundary ring and every point whose
stencil touches a pole is masked out of all norms.
"""

import json
from dataclasses import dataclass, field

import numpy as np

# absolute floor for C*h^2 tolerances; residuals below it are round-off
ROUNDOFF_FLOOR = 1e-10
# a refined residual must shrink at least this much to pass an estimated tolerance
SAFETY = 2.0


@dataclass(frozen=True)
class Grid:
    x0: float
    x1: float
    nx: int
    t0: float
    t1: float
    nt: int

    def __post_init__(self):
        if self.nx < 3 or self.nt < 3:
            raise ValueError("grid needs at least 3 points per axis")
        if not (self.x1 > self.x0 and self.t1 > self.t0):
            raise ValueError("grid bounds must be strictly increasing")

    @property
    def hx(self):
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def ht(self):
        return (self.t1 - self.t0) / (self.nt - 1)

    @property
    def x(self):
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def t(self):
        return np.linspace(self.t0, self.t1, self.nt)

    def mesh(self):
        """``(X, T)`` arrays of shape ``(nt, nx)``."""
        T, X = np.meshgrid(self.t, self.x, indexing="ij")
        return X, T

    def refine(self, k=1):
        """Halve both spacings ``k`` times, keeping the coarse nodes."""
        nx, nt = self.nx, self.nt
        for _ in range(k):
            nx, nt = 2 * nx - 1, 2 * nt - 1
        return Grid(self.x0, self.x1, nx, self.t0, self.t1, nt)

    def coarsen(self):
        if self.nx % 2 == 0 or self.nt % 2 == 0 or self.nx < 5 or self.nt < 5:
            return None
        return Grid(self.x0, self.x1, (self.nx + 1) // 2, self.t0, self.t1, (self.nt + 1) // 2)


@dataclass
class FieldGrid:
    grid: Grid
    samples: np.ndarray  # (nt, nx, ...) complex
    mask: np.ndarray = None  # (nt, nx) True where the value is not usable

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.shape[:2] != (self.grid.nt, self.grid.nx):
            raise ValueError(
                f"samples shape {self.samples.shape[:2]} does not match grid ({self.grid.nt}, {self.grid.nx})"
            )
        if self.mask is None:
            self.mask = np.zeros((self.grid.nt, self.grid.nx), dtype=bool)
        bad = ~np.isfinite(self.samples).reshape(self.grid.nt, self.grid.nx, -1).all(axis=-1)
        self.mask = np.asarray(self.mask, dtype=bool) | bad

    def subsample(self):
        """Every other node, i.e. the same field on ``grid.coarsen()``."""
        coarse = self.grid.coarsen()
        if coarse is None:
            return None
        return FieldGrid(coarse, self.samples[::2, ::2], self.mask[::2, ::2])

    def map(self, fn):
        return FieldGrid(self.grid, fn(self.samples), self.mask)


@dataclass
class ResidualReport:
    name: str
    max_norm: float
    mean_norm: float
    hx: float
    ht: float
    tolerance: float
    masked_points: int
    notes: tuple = field(default_factory=tuple)

    @property
    def verdict(self):
        return "pass" if self.max_norm <= self.tolerance else "fail"

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        return {
            "name": self.name,
            "max_norm": self.max_norm,
            "mean_norm": self.mean_norm,
            "hx": self.hx,
            "ht": self.ht,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "masked_points": self.masked_points,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def _dilate(mask):
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    # cross stencil reaches the diagonal neighbours
    out[1:, 1:] |= mask[:-1, :-1]
    out[1:, :-1] |= mask[:-1, 1:]
    out[:-1, 1:] |= mask[1:, :-1]
    out[:-1, :-1] |= mask[1:, 1:]
    return out


def fd_partial(f, axis):
    """Central-difference derivative of a :class:`FieldGrid`.

    ``axis`` is ``"x"``, ``"t"`` or ``"xt"`` (mixed, 4-point cross stencil).
    The result lives on the same grid with the boundary ring masked.
    """
    g = f.grid
    u = f.samples
    out = np.full(u.shape, np.nan, dtype=complex)
    if axis == "x":
        out[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2 * g.hx)
    elif axis == "t":
        out[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2 * g.ht)
    elif axis == "xt":
        out[1:-1, 1:-1] = ((u[2:, 2:] - u[:-2, 2:]) - (u[2:, :-2] - u[:-2, :-2])) / (4 * g.hx * g.ht)
    else:
        raise ValueError(f"unknown derivative axis {axis!r}")
    mask = _dilate(f.mask)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return FieldGrid(g, out, mask)


def pointwise_norm(samples):
    """Frobenius norm per grid node for matrix samples, modulus for scalars."""
    s = np.asarray(samples)
    if s.ndim == 2:
        return np.abs(s)
    return np.sqrt((np.abs(s) ** 2).reshape(s.shape[0], s.shape[1], -1).sum(axis=-1))


def _norms(values, mask):
    good = ~mask & np.isfinite(values)
    if not good.any():
        return float("nan"), float("nan"), int(mask.size)
    v = values[good]
    return float(v.max()), float(v.mean()), int((~good).sum())


def fd_report(name, residual, fields, tolerance=None, notes=()):
    """Evaluate ``residual(*fields) -> FieldGrid`` of pointwise norms.

    Without an explicit tolerance the C*h^2 rule applies: C comes from the
    same residual on the nested coarse subgrid, and the fine residual must
    sit below ``max(C h^2 * SAFETY, ROUNDOFF_FLOOR)``.
    """
    res = residual(*fields)
    mx, mean, masked = _norms(res.samples.real, res.mask)
    g = res.grid
    if tolerance is None:
        coarse = [f.subsample() for f in fields]
        if any(c is None for c in coarse):
            raise ValueError("C*h^2 tolerance needs odd grids with at least 5 nodes per axis")
        cres = residual(*coarse)
        cmx, _, _ = _norms(cres.samples.real, cres.mask)
        C = cmx / (cres.grid.hx ** 2 + cres.grid.ht ** 2)
        tolerance = max(SAFETY * C * (g.hx ** 2 + g.ht ** 2), ROUNDOFF_FLOOR) if np.isfinite(C) else 0.0
    if not np.isfinite(mx):
        mx = float("inf")
    return ResidualReport(name, mx, mean, g.hx, g.ht, float(tolerance), masked, tuple(notes))


def convergence_study(residual, make_fields, grids):
    """Residual reports on nested grids, tolerances from the coarsest one.

    ``make_fields(grid)`` returns the tuple of FieldGrids fed to
    ``residual``. Returns ``(reports, ratios)`` where ``ratios[k]`` is
    ``max_norm[k] / max_norm[k + 1]``.
    """
    raw = [residual(*make_fields(g)) for g in grids]
    maxes = [_norms(r.samples.real, r.mask) for r in raw]
    g0 = grids[0]
    C = maxes[0][0] / (g0.hx ** 2 + g0.ht ** 2)
    reports = []
    for g, r, (mx, mean, masked) in zip(grids, raw, maxes):
        tol = max(SAFETY * C * (g.hx ** 2 + g.ht ** 2), ROUNDOFF_FLOOR)
        reports.append(ResidualReport("", mx, mean, g.hx, g.ht, tol, masked))
    ratios = [a.max_norm / b.max_norm if b.max_norm > 0 else float("inf") for a, b in zip(reports, reports[1:])]
    return reports, ratios


# residual builders ---------------------------------------------------------


def cd_residual(q, r):
    qxt = fd_partial(q, "xt")
    qx = fd_partial(q, "x")
    rxt = fd_partial(r, "xt")
    rx = fd_partial(r, "x")
    e1 = qxt.samples + 2 * rx.samples * r.samples
    e2 = rxt.samples - 2 * qx.samples * r.samples
    mask = qxt.mask | qx.mask | rxt.mask | rx.mask
    return FieldGrid(q.grid, np.maximum(np.abs(e1), np.abs(e2)), mask)


def sine_gordon_residual(phi):
    pxt = fd_partial(phi, "xt")
    return FieldGrid(phi.grid, np.abs(pxt.samples - 2 * np.sin(phi.samples)), pxt.mask)


def check_cd_system(q, r, tolerance=None):
    """Residual of the coupled dispersionless pair

        q_xt + 2 r r_x = 0,    r_xt - 2 q_x r = 0.
    """
    if q.grid != r.grid:
        raise ValueError("q and r live on different grids")
    return fd_report("cd_system", cd_residual, (q, r), tolerance)


def check_sine_gordon(phi, tolerance=None):
    """Residual of ``phi_xt = 2 sin(phi)``.

    A background far from ``phi = 0 (mod 2 pi)`` on the left edge is noted,
    not failed.
    """
    notes = []
    edge = phi.samples[:, 0][~phi.mask[:, 0]].real
    if edge.size and np.max(np.abs(np.angle(np.exp(1j * edge)))) > 0.1:
        notes.append("non-vacuum background: phi does not approach 0 mod 2pi on the left edge")
    return fd_report("sine_gordon", sine_gordon_residual, (phi,), tolerance, notes)


def check_circle_invariant(qx, rx, mask=None, tolerance=1e-8, hx=float("nan"), ht=float("nan")):
    """``max |q_x^2 + r_x^2 - 1|`` from analytic derivative samples."""
    qx = np.asarray(qx)
    rx = np.asarray(rx)
    dev = np.abs(qx ** 2 + rx ** 2 - 1.0)
    if mask is None:
        mask = np.zeros(dev.shape, dtype=bool)
    mx, mean, masked = _norms(dev, np.asarray(mask) | ~np.isfinite(dev))
    if not np.isfinite(mx):
        mx = float("inf")
    return ResidualReport("circle_invariant", mx, mean, hx, ht, tolerance, masked)


def check_reduction(handle, grid, tolerance=1e-9):
    """Anti-hermiticity and tracelessness of S[N] and of every stage's M.

    ``handle`` is anything exposing ``evaluate(x, t)`` that returns an
    object with ``S``, ``M`` (list) and ``pole`` attributes.
    """
    X, T = grid.mesh()
    ev = handle.evaluate(X, T)
    mats = [ev.S] + list(ev.M)
    dev = np.zeros(X.shape)
    for A in mats:
        herm = pointwise_norm(A + np.conj(np.swapaxes(A, -1, -2)))
        tr = np.abs(np.trace(A, axis1=-2, axis2=-1))
        dev = np.maximum(dev, np.maximum(herm, tr))
    mx, mean, masked = _norms(dev, ev.pole)
    if not np.isfinite(mx):
        mx = float("inf")
    return ResidualReport("reduction", mx, mean, grid.hx, grid.ht, tolerance, masked)
