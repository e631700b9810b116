"""SU(2) reduction: scalar eigenfunctions, determinant solutions, sine-Gordon.

With ``S = i [[q, r], [r, -q]]`` and ``G = -(i/2) diag(1, -1)`` the matrix
system becomes the coupled dispersionless pair

    q_xt + 2 r r_x = 0,    r_xt - 2 q_x r = 0.

After the constant gauge ``Omega`` the Lax pair acts on scalar pairs
``(X, Y)``. On the seed ``q = x``, ``r = 0``:

    X_x = i lam Y,  Y_x = i lam X,  X_t = -(i / 2 lam) Y,  Y_t = -(i / 2 lam) X.

Sign conventions
----------------
The one-fold maps can be written with either sign in front of the
log-derivative terms. ``"oracle"`` (default) is

    q[N] = q - d/dt log(D1 D2),   r[N] = (-1)^N r - i d/dt log(D1 / D2),

which is what conjugating the matrix transformation by ``Omega`` produces and
what the PDE residual accepts. ``"paper"`` flips both signs; it gives
``q_x[1] = 1 + 2 sech^2`` and fails the residual.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import batched_solve

OMEGA = np.array([[1, 1], [-1j, 1j]], dtype=complex) / np.sqrt(2)
OMEGA_INV = np.conj(OMEGA.T)

SIGN = {"oracle": -1.0, "paper": 1.0}


def _sign(convention):
    try:
        return SIGN[convention]
    except KeyError:
        raise ValueError(f"unknown sign convention {convention!r}; use 'oracle' or 'paper'") from None


def gauge_transform(S):
    """``Omega^{-1} S Omega``."""
    S = np.asarray(S, dtype=complex)
    if S.shape[-2:] != (2, 2):
        raise ValueError("gauge transform is defined for 2x2 matrices")
    return OMEGA_INV @ S @ OMEGA


def gauge_inverse(St):
    return OMEGA @ np.asarray(St, dtype=complex) @ OMEGA_INV


def qr_from_gauged(St):
    """Read ``(q, r)`` from ``i [[0, q + i r], [q - i r, 0]]``."""
    a = St[..., 0, 1] / 1j
    b = St[..., 1, 0] / 1j
    return (a + b) / 2, (a - b) / 2j


def qr_from_matrix(S):
    return qr_from_gauged(gauge_transform(S))


@dataclass(frozen=True)
class ScalarSpectralPoint:
    """Spectral datum ``lam`` with constants ``(alpha, beta)``.

    ``(alpha, beta)`` is the matrix-gauge column at the origin, so
    ``(X, Y)(0, 0) = Omega^{-1} (alpha, beta)`` and ``tan(omega/2) = beta/alpha``.
    """

    lam: complex
    alpha: complex = 1.0
    beta: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        if self.lam == 0:
            raise ValueError("spectral parameter must be non-zero")
        if self.alpha == 0 and self.beta == 0:
            raise ValueError("(alpha, beta) must not both vanish")

    @property
    def coefficients(self):
        """``(a, b)`` in ``X = a e^u + b e^-u``, ``Y = a e^u - b e^-u``."""
        x0, y0 = OMEGA_INV @ np.array([self.alpha, self.beta])
        return (x0 + y0) / 2, (x0 - y0) / 2

    def check_reduction(self, atol=1e-12):
        problems = []
        if abs(self.lam.real) > atol:
            problems.append("lambda is not pure imaginary")
        if abs((self.alpha * np.conj(self.beta)).imag) > atol * max(1.0, abs(self.alpha) * abs(self.beta)):
            problems.append("beta/alpha is not real")
        return problems

    def matrix_stage(self):
        from .model import SpectralStep

        return SpectralStep.su2_pair(self.lam, (self.alpha, self.beta))


@dataclass
class Eigen:
    """Scalar eigenfunction pair with analytic derivatives on the seed."""

    X: np.ndarray
    Y: np.ndarray
    Xx: np.ndarray
    Yx: np.ndarray
    Xt: np.ndarray
    Yt: np.ndarray
    Xxt: np.ndarray
    Yxt: np.ndarray


def scalar_vacuum_eigenfunctions(p, x, t):
    lam = p.lam
    a, b = p.coefficients
    u = 1j * lam * np.asarray(x, dtype=float) - 1j * np.asarray(t, dtype=float) / (2 * lam)
    ep = np.exp(u)
    em = np.exp(-u)
    X = a * ep + b * em
    Y = a * ep - b * em
    return Eigen(
        X, Y,
        1j * lam * Y, 1j * lam * X,
        -0.5j / lam * Y, -0.5j / lam * X,
        X / 2, Y / 2,
    )


def seed_lax_defect(X, Y, Xx, Yx, Xt, Yt, lam, qx=1.0, r=0.0, rx=0.0):
    """Residuals of the gauged Lax pair for given derivative samples."""
    e1 = Xx - 1j * lam * (qx + 1j * rx) * Y
    e2 = Yx - 1j * lam * (qx - 1j * rx) * X
    e3 = Xt - (1j * r * X - 0.5j / lam * Y)
    e4 = Yt - (-0.5j / lam * X - 1j * r * Y)
    return max(np.max(np.abs(e)) for e in (e1, e2, e3, e4))


# Delta determinants ---------------------------------------------------------


def _row_is_x(which, size, k):
    # the last row is X^{(size-1)} for Delta_1 (Y^{(size-1)} for Delta_2), rows alternate upward
    parity = (size - 1 - k) % 2 == 0
    return parity if which == 1 else not parity


def delta_matrix(points, eig, which, border=None):
    """Matrix whose determinant is Delta_which, with entry derivatives.

    ``eig[k]`` is the :class:`Eigen` of ``points[k]``. ``border`` is an
    optional ``(Eigen, lam)`` appended as the last column, giving the
    bordered determinant of size N + 1.

    Returns ``(A, A_x, A_t, A_xt)`` with shape ``(..., m, m)``.
    """
    cols = [(e, p.lam) for e, p in zip(eig, points)]
    if border is not None:
        cols.append(border)
    m = len(cols)
    shape = np.broadcast(*[c[0].X for c in cols]).shape
    out = [np.empty(shape + (m, m), dtype=complex) for _ in range(4)]
    for k in range(m):
        use_x = _row_is_x(which, m, k)
        for j, (e, lam) in enumerate(cols):
            w = lam ** (-k)
            if use_x:
                vals = (e.X, e.Xx, e.Xt, e.Xxt)
            else:
                vals = (e.Y, e.Yx, e.Yt, e.Yxt)
            for o, v in zip(out, vals):
                o[..., k, j] = w * v
    return tuple(out)


@dataclass
class LogDet:
    value: np.ndarray  # det
    dx: np.ndarray  # d/dx log det
    dt: np.ndarray
    dxdt: np.ndarray
    singular: np.ndarray


def log_det_derivatives(A, Ax, At, Axt):
    """Jacobi's formula for first and mixed derivatives of ``log det A``."""
    m = A.shape[-1]
    rhs = np.concatenate([Ax, At, Axt], axis=-1)
    sol, singular, _ = batched_solve(A, rhs)
    Px = sol[..., :m]
    Pt = sol[..., m:2 * m]
    Pxt = sol[..., 2 * m:]
    tr = lambda P: np.trace(P, axis1=-2, axis2=-1)
    dxdt = tr(Pxt) - tr(Px @ Pt)
    value = np.linalg.det(A)
    singular = singular | (value == 0)
    return LogDet(value, tr(Px), tr(Pt), dxdt, singular)


def delta_determinants(points, x, t, border=None):
    """``(Delta_1, Delta_2)`` as :class:`LogDet` at the sample points.

    ``border = (point_or_lam, Eigen)`` adds the (X, Y) column for the
    bordered determinants of size N + 1.
    """
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    if len(points) == 0 and border is None:
        ones = np.ones(x.shape, dtype=complex)
        zero = np.zeros(x.shape, dtype=complex)
        d = LogDet(ones, zero, zero, zero, np.zeros(x.shape, dtype=bool))
        return d, d
    eig = [scalar_vacuum_eigenfunctions(p, x, t) for p in points]
    return tuple(log_det_derivatives(*delta_matrix(points, eig, w, border)) for w in (1, 2))


# solutions ------------------------------------------------------------------


@dataclass
class ScalarSample:
    """q, r and their analytic x-derivatives, plus the determinants."""

    q: np.ndarray
    r: np.ndarray
    qx: np.ndarray
    rx: np.ndarray
    phi_t: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    pole: np.ndarray


class ScalarSolution:
    """N-soliton of the coupled dispersionless pair from the Delta determinants."""

    def __init__(self, points, convention="oracle"):
        self.points = [p if isinstance(p, ScalarSpectralPoint) else ScalarSpectralPoint(*p) for p in points]
        lams = np.array([p.lam for p in self.points])
        if lams.size > 1 and (np.abs(lams[:, None] - lams[None, :]) + np.eye(lams.size)).min() < 1e-10:
            raise ValueError("spectral points must be pairwise distinct")
        self.convention = convention
        self.sign = _sign(convention)

    @property
    def order(self):
        return len(self.points)

    def evaluate(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        d1, d2 = delta_determinants(self.points, x, t)
        s = self.sign
        q = x + s * (d1.dt + d2.dt)
        qx = 1.0 + s * (d1.dxdt + d2.dxdt)
        r = s * 1j * (d1.dt - d2.dt)
        rx = s * 1j * (d1.dxdt - d2.dxdt)
        phi_t = 2j * (d1.dt - d2.dt)
        pole = d1.singular | d2.singular | ~np.isfinite(q) | ~np.isfinite(r)
        return ScalarSample(q, r, qx, rx, phi_t, d1.value, d2.value, pole)

    def eigenfunctions(self, lam, x, t, alpha=1.0, beta=1.0):
        """``(X[N], Y[N])`` at a further spectral point as determinant ratios."""
        p = ScalarSpectralPoint(lam, alpha, beta)
        if any(abs(p.lam - q.lam) < 1e-10 for q in self.points):
            raise ValueError("spectral parameter collides with a soliton eigenvalue")
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        e = scalar_vacuum_eigenfunctions(p, x, t)
        b1, b2 = delta_determinants(self.points, x, t, border=(e, p.lam))
        d1, d2 = delta_determinants(self.points, x, t)
        return b1.value / d2.value, b2.value / d1.value


def scalar_nfold(points, convention="oracle"):
    return ScalarSolution(points, convention)


# iterated one-fold maps -----------------------------------------------------


@dataclass
class ScalarState:
    """Callable fields ``q, r`` and a dresser for particular eigenfunctions."""

    q: object
    r: object
    eig: object  # (ScalarSpectralPoint, x, t) -> (X, Y)


def vacuum_state():
    def eig(p, x, t):
        e = scalar_vacuum_eigenfunctions(p, x, t)
        return e.X, e.Y

    return ScalarState(
        lambda x, t: np.asarray(x, float) + 0 * np.asarray(t, float),
        lambda x, t: np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape),
        eig,
    )


def scalar_onefold(p, state, convention="oracle"):
    """Apply the one-fold Darboux map with particular solution at ``p``.

    New eigenfunctions: ``X[1] = X/lam - (X1/lam1) Y / Y1``,
    ``Y[1] = Y/lam - (Y1/lam1) X / X1``. Fields use the ratio forms.
    """
    s = _sign(convention)
    lam1 = p.lam

    def ratios(x, t):
        X1, Y1 = state.eig(p, x, t)
        return X1 / Y1 / lam1, Y1 / X1 / lam1

    def q(x, t):
        a, b = ratios(x, t)
        return state.q(x, t) - s * 0.5j * (a + b)

    def r(x, t):
        a, b = ratios(x, t)
        return state.r(x, t) - s * 0.5 * (a - b)

    def eig(p2, x, t):
        if abs(p2.lam - lam1) < 1e-10:
            raise ValueError("spectral parameter collides with the transformation eigenvalue")
        X1, Y1 = state.eig(p, x, t)
        X, Y = state.eig(p2, x, t)
        return X / p2.lam - X1 / lam1 * Y / Y1, Y / p2.lam - Y1 / lam1 * X / X1

    return ScalarState(q, r, eig)


def iterate_onefold(points, convention="oracle"):
    state = vacuum_state()
    for p in points:
        state = scalar_onefold(p, state, convention)
    return state


# sine-Gordon ----------------------------------------------------------------


@dataclass
class SineGordonField:
    """phi on a grid, unwrapped along x from the left edge."""

    grid: object
    phi: np.ndarray
    ratio: np.ndarray  # Delta_1 / Delta_2
    phi_t: np.ndarray
    pole: np.ndarray


def phi_principal(points, x, t):
    """``2 i log(Delta_1 / Delta_2)`` on the principal branch."""
    d1, d2 = delta_determinants(points, x, t)
    return 2j * np.log(d1.value / d2.value)


def sine_gordon(points, grid):
    """``phi[N] = 2 i log(Delta_1 / Delta_2)`` about the seed ``phi = 0``.

    The branch is fixed by unwrapping each t-row along x and anchoring the
    left edge at the multiple of 2 pi nearest to it.
    """
    X, T = grid.mesh()
    d1, d2 = delta_determinants(list(points), X, T)
    ratio = d1.value / d2.value
    pole = d1.singular | d2.singular | ~np.isfinite(ratio)
    raw = 2j * np.log(np.where(pole, 1.0, ratio))
    phi = raw.real
    if np.any(pole):
        # rows with poles cannot be unwrapped continuously through them
        phi = np.where(pole, np.nan, phi)
    unwrapped = np.unwrap(np.nan_to_num(phi), axis=1, period=2 * np.pi)
    anchor = 2 * np.pi * np.round(unwrapped[:, :1] / (2 * np.pi))
    phi = np.where(pole, np.nan, unwrapped - anchor + 1j * raw.imag)
    phi_t = 2j * (d1.dt - d2.dt)
    return SineGordonField(grid, phi, ratio, phi_t, pole)
