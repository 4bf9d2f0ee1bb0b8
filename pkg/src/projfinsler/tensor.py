"""Fundamental tensor, its determinant, and strong-convexity checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Invariants, Points, as_batch, jet_lift
from .metrics import FamilyDescriptor, _check_domain, phi_jet


@dataclass
class FundamentalTensor:
    g: np.ndarray            # (B, n, n)
    det_closed: np.ndarray   # (B,)
    det_numeric: np.ndarray  # (B,)


def _phi_partials(descriptor, batch):
    phi = phi_jet(descriptor, batch, order=2)
    # variables: 0 = r, 1 = u, 2 = v
    return (phi.value, phi.partial(1), phi.partial(2),
            phi.partial(1, 1), phi.partial(1, 2), phi.partial(2, 2))


def _closed_g(partials, batch):
    p, pu, pv, puu, puv, pvv = partials
    u = batch.u
    x, y = batch.x, batch.y
    n = batch.n
    a = p * pu / u
    b = pv * pv + p * pvv
    c = (pu * pu + p * puu) / u**2 - p * pu / u**3
    d = (pu * pv + p * puv) / u
    xx = x[:, :, None] * x[:, None, :]
    yy = y[:, :, None] * y[:, None, :]
    xy = x[:, :, None] * y[:, None, :]
    g = (a[:, None, None] * np.eye(n) + b[:, None, None] * xx + c[:, None, None] * yy
         + d[:, None, None] * (xy + np.swapaxes(xy, 1, 2)))
    return g


def _closed_det(partials, batch, n):
    p, pu, pv, puu, puv, pvv = partials
    u = batch.u
    cross = batch.r**2 * u**2 - batch.v**2
    return (p / u) ** (n + 1) * pu ** (n - 2) * (pu + cross * pvv / u)


def fundamental_tensor_closed(descriptor: FamilyDescriptor, points: Points) -> FundamentalTensor:
    """g_ij from the phi(r, u, v) formula, with exact jet partials."""
    batch, single = as_batch(points)
    if np.any(batch.u == 0):
        raise ZeroDivisionError("u = |y| must be positive")
    _check_domain(descriptor, batch)
    partials = _phi_partials(descriptor, batch)
    g = _closed_g(partials, batch)
    g = 0.5 * (g + np.swapaxes(g, 1, 2))
    det_c = _closed_det(partials, batch, batch.n)
    det_n = np.linalg.det(g)
    if single:
        return FundamentalTensor(g[0], det_c[0], det_n[0])
    return FundamentalTensor(g, det_c, det_n)


def det_closed_form(descriptor: FamilyDescriptor, points: Points, n: int | None = None):
    batch, single = as_batch(points)
    if np.any(batch.u == 0):
        raise ZeroDivisionError("u = |y| must be positive")
    det = _closed_det(_phi_partials(descriptor, batch), batch, batch.n if n is None else n)
    return float(det[0]) if single else det


def hessian_tensor(descriptor: FamilyDescriptor, points: Points) -> np.ndarray:
    """Independent oracle: g = 1/2 * (y-Hessian of F^2), jets seeded in y."""
    batch, single = as_batch(points)
    _check_domain(descriptor, batch)
    ys = jet_lift(batch, "y", order=2)
    xs = list(batch.x.T)
    F = descriptor.evaluate(Invariants.from_xy(xs, list(ys)))
    g = 0.5 * (F * F).hessian()
    return g[0] if single else g


def min_eigenvalues(g: np.ndarray) -> np.ndarray:
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    return np.linalg.eigvalsh(g)[..., 0]


def is_positive_definite(g: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue above 1e-10 times the trace."""
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    tr = np.trace(g, axis1=-2, axis2=-1)
    return min_eigenvalues(g) > 1e-10 * np.abs(tr)


def convexity_margin(descriptor: FamilyDescriptor, sample: Points) -> float:
    """Minimum eigenvalue of g over the sample (negative values are reported)."""
    ft = fundamental_tensor_closed(descriptor, as_batch(sample)[0])
    return float(np.min(min_eigenvalues(ft.g)))
