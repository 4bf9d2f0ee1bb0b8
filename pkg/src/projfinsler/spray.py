"""Geodesic spray, Riemann operator and flag curvature in ambient coordinates.

This path never uses the invariants-based PDEs: it differentiates ``F^2`` as
a function of the ``2n`` components of ``(x, y)``.

    G^i   = 1/4 g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l})
    R^i_k = 2 dG^i/dx^k - y^j d2G^i/dx^j dy^k + 2 G^j d2G^i/dy^j dy^k
            - dG^i/dy^j dG^j/dy^k

``R`` needs second derivatives of ``G``, which already contains second
derivatives of ``F^2``, so ``F^2`` is expanded to fourth order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .geometry import Flag, Invariants
from .jets import Jet
from .metrics import DomainError, FamilyDescriptor


class SingularTensorError(ArithmeticError):
    pass


def _xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")
    if np.any(np.linalg.norm(y, axis=1) == 0):
        raise ValueError("direction y must be non-zero")
    return x, y, single


def _check_inside(descriptor, x):
    if np.isfinite(descriptor.domain_radius) and np.any(
            np.linalg.norm(x, axis=1) >= descriptor.domain_radius):
        raise DomainError(f"point outside the domain of {descriptor.label()}")


def f2_jet(descriptor: FamilyDescriptor, x, y, order: int) -> Jet:
    """Jet of F^2 in the variables (x_1..x_n, y_1..y_n)."""
    n = x.shape[1]
    seeds = jets.seed(list(x.T) + list(y.T), order)
    F = descriptor.evaluate(Invariants.from_xy(seeds[:n], seeds[n:]))
    if not isinstance(F, Jet):
        F = Jet.constant(np.broadcast_to(F, x.shape[:1]), seeds[0].space)
    return F * F


def _check_g(g):
    ev = np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2)))
    if np.any(ev[..., 0] <= 1e-12 * np.abs(ev[..., -1])):
        raise SingularTensorError("fundamental tensor is singular or indefinite")


def spray_vector(descriptor: FamilyDescriptor, x, y) -> np.ndarray:
    """Spray coefficients G only (second-order jets), shape like ``y``."""
    x, y, single = _xy(x, y)
    _check_inside(descriptor, x)
    n = x.shape[1]
    T = f2_jet(descriptor, x, y, 2)
    H = T.hessian()
    grad = T.gradient()
    g = 0.5 * H[:, n:, n:]
    _check_g(g)
    b = np.einsum("bkl,bk->bl", H[:, :n, n:], y) - grad[:, :n]
    G = 0.25 * np.linalg.solve(g, b[..., None])[..., 0]
    return G[0] if single else G


def _solve_jets(A, b):
    """Gaussian elimination on a symmetric positive definite jet system."""
    n = len(b)
    A = [list(row) for row in A]
    b = list(b)
    for k in range(n):
        inv = A[k][k].reciprocal()
        for i in range(k + 1, n):
            f = A[i][k] * inv
            for j in range(k + 1, n):
                A[i][j] = A[i][j] - f * A[k][j]
            b[i] = b[i] - f * b[k]
    out = [None] * n
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, n):
            acc = acc - A[i][j] * out[j]
        out[i] = acc / A[i][i]
    return out


@dataclass
class SprayData:
    G: np.ndarray          # (B, n)              G^i
    dG_dx: np.ndarray      # (B, n, n)  [i, k] = dG^i/dx^k
    dG_dy: np.ndarray      # (B, n, n)  [i, k] = dG^i/dy^k
    d2G_dxdy: np.ndarray   # (B, n, n, n) [i, j, k] = d2G^i/dx^j dy^k
    d2G_dydy: np.ndarray   # (B, n, n, n) [i, j, k] = d2G^i/dy^j dy^k
    g: np.ndarray          # (B, n, n) fundamental tensor
    F2: np.ndarray         # (B,)


def _spray_data(descriptor, x, y) -> SprayData:
    n = x.shape[1]
    B = x.shape[0]
    T = f2_jet(descriptor, x, y, 4)
    g_val = 0.5 * T.hessian()[:, n:, n:]
    _check_g(g_val)

    Ty = [T.diff(n + l) for l in range(n)]
    g = [[0.5 * Ty[i].diff(n + j) for j in range(n)] for i in range(n)]
    lower = g[0][0].space
    ys = [Jet.variable(y[:, k], n + k, lower) for k in range(n)]
    b = []
    for l in range(n):
        acc = -T.diff(l).truncate(2)
        for k in range(n):
            acc = acc + Ty[l].diff(k) * ys[k]
        b.append(acc)
    G4 = _solve_jets(g, b)
    Gj = [0.25 * Gi for Gi in G4]

    Garr = np.stack([Gi.value for Gi in Gj], -1)
    dG_dx = np.empty((B, n, n))
    dG_dy = np.empty((B, n, n))
    d2xy = np.empty((B, n, n, n))
    d2yy = np.empty((B, n, n, n))
    for i, Gi in enumerate(Gj):
        for k in range(n):
            dG_dx[:, i, k] = Gi.partial(k)
            dG_dy[:, i, k] = Gi.partial(n + k)
            for j in range(n):
                d2xy[:, i, j, k] = Gi.partial(j, n + k)
                d2yy[:, i, j, k] = Gi.partial(n + j, n + k)
    return SprayData(Garr, dG_dx, dG_dy, d2xy, d2yy, g_val, T.value)


def _squeeze_spray(sd: SprayData) -> SprayData:
    return SprayData(*(getattr(sd, f)[0] for f in sd.__dataclass_fields__))


def spray_coefficients(descriptor: FamilyDescriptor, x, y) -> SprayData:
    x, y, single = _xy(x, y)
    _check_inside(descriptor, x)
    sd = _spray_data(descriptor, x, y)
    return _squeeze_spray(sd) if single else sd


def collinearity_defect(G, y) -> np.ndarray:
    """|G - (G.y/|y|^2) y| / |G|: zero iff G is a multiple of y."""
    G = np.atleast_2d(G)
    y = np.atleast_2d(y)
    proj = np.einsum("bi,bi->b", G, y) / np.einsum("bi,bi->b", y, y)
    rej = np.linalg.norm(G - proj[:, None] * y, axis=1)
    nG = np.linalg.norm(G, axis=1)
    return np.where(nG > 0, rej / np.where(nG > 0, nG, 1.0), 0.0)


@dataclass
class RiemannData:
    R: np.ndarray       # (B, n, n)  [i, k] = R^i_k
    scale: np.ndarray   # (B,) sum of Frobenius norms of the four terms of R
    g: np.ndarray       # (B, n, n)
    F2: np.ndarray      # (B,)
    y: np.ndarray       # (B, n)


def _riemann(descriptor, x, y) -> RiemannData:
    sd = _spray_data(descriptor, x, y)
    t1 = 2 * sd.dG_dx
    t2 = -np.einsum("bj,bijk->bik", y, sd.d2G_dxdy)
    t3 = 2 * np.einsum("bj,bijk->bik", sd.G, sd.d2G_dydy)
    t4 = -np.einsum("bij,bjk->bik", sd.dG_dy, sd.dG_dy)
    R = t1 + t2 + t3 + t4
    fro = lambda m: np.linalg.norm(m, axis=(1, 2))
    scale = fro(t1) + fro(t2) + fro(t3) + fro(t4)
    return RiemannData(R, scale, sd.g, sd.F2, y)


def riemann_operator(descriptor: FamilyDescriptor, x, y) -> RiemannData:
    x, y, single = _xy(x, y)
    _check_inside(descriptor, x)
    rd = _riemann(descriptor, x, y)
    if single:
        return RiemannData(rd.R[0], rd.scale[0], rd.g[0], rd.F2[0], rd.y[0])
    return rd


def null_direction_defect(rd: RiemannData) -> np.ndarray:
    """|R y| relative to the scale of R."""
    R = rd.R if rd.R.ndim == 3 else rd.R[None]
    y = np.atleast_2d(rd.y)
    scale = np.atleast_1d(rd.scale)
    Ry = np.einsum("bik,bk->bi", R, y)
    return np.linalg.norm(Ry, axis=1) / ((scale + 1e-300) * np.linalg.norm(y, axis=1))


def _g_orthogonalize(g, y, V):
    gyV = np.einsum("bi,bij,bj->b", y, g, V)
    gyy = np.einsum("bi,bij,bj->b", y, g, y)
    return V - (gyV / gyy)[:, None] * y


FLAG_DEGENERACY_TOL = 1e-8


def _flag_k(rd: RiemannData, V):
    g, y, R = rd.g, rd.y, rd.R
    W = _g_orthogonalize(g, y, V)
    gWW = np.einsum("bi,bij,bj->b", W, g, W)
    gVV = np.einsum("bi,bij,bj->b", V, g, V)
    if np.any(gWW <= FLAG_DEGENERACY_TOL * gVV):
        raise ValueError("degenerate flag: V is (nearly) parallel to y")
    RW = np.einsum("bik,bk->bi", R, W)
    num = np.einsum("bj,bji,bi->b", W, g, RW)
    gyW = np.einsum("bi,bij,bj->b", y, g, W)
    den = rd.F2 * gWW - gyW**2
    return num / den


def flag_curvature(descriptor: FamilyDescriptor, flags) -> np.ndarray | float:
    """K(y, V) = g(R(V), V) / (F^2 g(V, V) - g(y, V)^2) for each flag."""
    single = isinstance(flags, Flag)
    if single:
        flags = [flags]
    x = np.array([f.point.x for f in flags])
    y = np.array([f.point.y for f in flags])
    V = np.array([f.V for f in flags])
    _check_inside(descriptor, x)
    K = _flag_k(_riemann(descriptor, x, y), V)
    return float(K[0]) if single else K


def flag_curvature_xyv(descriptor: FamilyDescriptor, x, y, V) -> np.ndarray:
    x, y, _ = _xy(x, y)
    return _flag_k(_riemann(descriptor, x, y), np.atleast_2d(V))


def constant_curvature_tensor_residual(descriptor: FamilyDescriptor, x, y, lam: float):
    """Normalised defect of R^i_k = lam (F^2 delta^i_k - y^i g_kj y^j)."""
    x, y, single = _xy(x, y)
    _check_inside(descriptor, x)
    rd = _riemann(descriptor, x, y)
    n = x.shape[1]
    gy = np.einsum("bkj,bj->bk", rd.g, y)
    target = lam * (rd.F2[:, None, None] * np.eye(n) - y[:, :, None] * gy[:, None, :])
    res = np.linalg.norm(rd.R - target, axis=(1, 2)) / (
        rd.scale + np.linalg.norm(target, axis=(1, 2)) + 1e-300)
    return float(res[0]) if single else res


def self_adjointness_defect(rd: RiemannData, V, W) -> np.ndarray:
    """|g(R V, W) - g(V, R W)| for V, W g-orthogonal to y, relative."""
    V = _g_orthogonalize(rd.g, rd.y, np.atleast_2d(V))
    W = _g_orthogonalize(rd.g, rd.y, np.atleast_2d(W))
    gRV_W = np.einsum("bi,bij,bj->b", np.einsum("bik,bk->bi", rd.R, V), rd.g, W)
    gV_RW = np.einsum("bi,bij,bj->b", V, rd.g, np.einsum("bik,bk->bi", rd.R, W))
    scale = (np.abs(gRV_W) + np.abs(gV_RW)
             + rd.scale * np.sqrt(np.einsum("bi,bij,bj->b", V, rd.g, V)
                                  * np.einsum("bi,bij,bj->b", W, rd.g, W)))
    return np.abs(gRV_W - gV_RW) / (scale + 1e-300)


# -- geodesics ------------------------------------------------------------

DEFAULT_STEP = 1e-3
DEFAULT_BOUNDARY_MARGIN = 0.02
MIN_STEPS = 10


class LeftDomainError(RuntimeError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray      # (m,)
    x: np.ndarray      # (m, n)
    xdot: np.ndarray   # (m, n)
    F: np.ndarray      # (m,)  metric value of the velocity
    truncated: bool


def _limit_radius(descriptor, margin):
    R = descriptor.domain_radius
    return R * (1.0 - margin) if np.isfinite(R) else np.inf


def geodesic_bundle(descriptor: FamilyDescriptor, x0, y0, steps: int = 1000,
                    step_size: float = DEFAULT_STEP,
                    margin: float = DEFAULT_BOUNDARY_MARGIN) -> list[Trajectory]:
    """Classical RK4 on x'' = -2 G(x, x') for several geodesics at once.

    A geodesic stops when an RK4 stage would come within ``margin`` (relative)
    of the domain boundary.
    """
    from .metrics import metric_value
    from .geometry import batch_from_xy

    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    v = np.atleast_2d(np.asarray(y0, dtype=float)).copy()
    m = x.shape[0]
    rlim = _limit_radius(descriptor, margin)
    if np.any(np.linalg.norm(x, axis=1) >= rlim):
        raise DomainError("initial point outside the domain (with boundary margin)")
    if np.any(np.linalg.norm(v, axis=1) == 0):
        raise ValueError("initial velocity must be non-zero")

    hist_x = [[xi.copy()] for xi in x]
    hist_v = [[vi.copy()] for vi in v]
    active = np.ones(m, dtype=bool)
    h = step_size

    def accel(px, pv):
        return -2.0 * spray_vector(descriptor, px, pv)

    def inside(px):
        return np.linalg.norm(px, axis=1) < rlim

    for _ in range(steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa, va = x[idx], v[idx]
        ok = np.ones(idx.size, dtype=bool)
        k1x, k1v = va, accel(xa, va)
        s2 = xa + 0.5 * h * k1x
        ok &= inside(s2)
        k2x = va + 0.5 * h * k1v
        k2v = np.zeros_like(va)
        k2v[ok] = accel(s2[ok], k2x[ok])
        s3 = xa + 0.5 * h * k2x
        ok &= inside(s3)
        k3x = va + 0.5 * h * k2v
        k3v = np.zeros_like(va)
        k3v[ok] = accel(s3[ok], k3x[ok])
        s4 = xa + h * k3x
        ok &= inside(s4)
        k4x = va + h * k3v
        k4v = np.zeros_like(va)
        k4v[ok] = accel(s4[ok], k4x[ok])
        xn = xa + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = va + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        ok &= inside(xn)
        active[idx[~ok]] = False
        for j, gi in enumerate(idx):
            if ok[j]:
                x[gi], v[gi] = xn[j], vn[j]
                hist_x[gi].append(xn[j].copy())
                hist_v[gi].append(vn[j].copy())

    out = []
    for gi in range(m):
        X = np.array(hist_x[gi])
        Xd = np.array(hist_v[gi])
        F = metric_value(descriptor, batch_from_xy(X, Xd))
        t = h * np.arange(len(X))
        out.append(Trajectory(t, X, Xd, np.asarray(F), truncated=len(X) < steps + 1))
    return out


def geodesic_integrate(descriptor: FamilyDescriptor, x0, y0, steps: int = 1000,
                       step_size: float = DEFAULT_STEP,
                       margin: float = DEFAULT_BOUNDARY_MARGIN) -> Trajectory:
    traj = geodesic_bundle(descriptor, x0, y0, steps, step_size, margin)[0]
    if len(traj.t) - 1 < min(MIN_STEPS, steps):
        raise LeftDomainError(f"geodesic left the domain after {len(traj.t) - 1} steps")
    return traj


def straightness_deviation(traj: Trajectory) -> float:
    """Max distance from the initial line x0 + span(y0), per unit arc length."""
    x0 = traj.x[0]
    d = traj.xdot[0] / np.linalg.norm(traj.xdot[0])
    rel = traj.x - x0
    perp = rel - np.outer(rel @ d, d)
    arc = float(np.sum(np.linalg.norm(np.diff(traj.x, axis=0), axis=1)))
    if arc == 0:
        return 0.0
    return float(np.max(np.linalg.norm(perp, axis=1)) / arc)


def speed_drift(traj: Trajectory) -> float:
    """Relative change of F along the trajectory, per unit parameter."""
    F0 = traj.F[0]
    T = float(traj.t[-1])
    if T == 0:
        return 0.0
    return float(np.max(np.abs(traj.F - F0)) / abs(F0) / T)
