"""Residuals of the characterizing PDEs.

Every residual is normalised as ``|sum of terms| / (sum of |terms| + 1e-300)``
so it is dimensionless and cannot hide behind a small metric value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import EvalPoint, Points, as_batch
from .metrics import FamilyDescriptor, _check_domain, phi_jet, phit_jet

EPS = 1e-300


class SingularPointError(ValueError):
    pass


def normalized(*terms) -> np.ndarray:
    terms = [np.asarray(t, dtype=float) for t in terms]
    total = sum(terms)
    scale = sum(np.abs(t) for t in terms)
    return np.abs(total) / (scale + EPS)


def _batch_off_origin(descriptor, points):
    batch, single = as_batch(points)
    if np.any(batch.r == 0):
        raise SingularPointError("r = 0 is excluded: v/r is singular there")
    _check_domain(descriptor, batch)
    return batch, single


def _out(values, single):
    if single:
        return float(np.asarray(values).reshape(-1)[0])
    return np.asarray(values)


def _ruv_partials(descriptor, batch):
    phi = phi_jet(descriptor, batch, order=2)
    return {
        "p": phi.value,
        "r": phi.partial(0), "u": phi.partial(1), "v": phi.partial(2),
        "rr": phi.partial(0, 0), "rv": phi.partial(0, 2), "vv": phi.partial(2, 2),
    }


def rapcsak_residual(descriptor: FamilyDescriptor, points: Points):
    """phi_rv v/r + phi_vv u^2 - phi_r/r, normalised."""
    batch, single = _batch_off_origin(descriptor, points)
    d = _ruv_partials(descriptor, batch)
    r, u, v = batch.r, batch.u, batch.v
    res = normalized(d["rv"] * v / r, d["vv"] * u * u, -d["r"] / r)
    return _out(res, single)


def _q(d, batch):
    r, u, v = batch.r, batch.u, batch.v
    Q = v / r * d["r"] + u * u * d["v"]
    Qr = -v / r**2 * d["r"] + v / r * d["rr"] + u * u * d["rv"]
    return Q, Qr


def q_eval(descriptor: FamilyDescriptor, points: Points, order: int = 0):
    """Q = (v/r) phi_r + u^2 phi_v; with ``order=1`` also returns Q_r."""
    batch, single = _batch_off_origin(descriptor, points)
    Q, Qr = _q(_ruv_partials(descriptor, batch), batch)
    if order == 0:
        return _out(Q, single)
    if order == 1:
        return _out(Q, single), _out(Qr, single)
    raise ValueError("q_eval order must be 0 or 1")


def q_via_z(descriptor: FamilyDescriptor, points: Points):
    """The same Q from the z-coordinates: u * d/dz2 (u phi~) = u^2 phi~_z2."""
    batch, single = as_batch(points)
    _check_domain(descriptor, batch)
    pt = phit_jet(descriptor, batch, order=1)
    return _out(batch.u**2 * pt.partial(1), single)


def _curvature_terms(d, batch, lam):
    r, u = batch.r, batch.u
    p, pr, pu, pv = d["p"], d["r"], d["u"], d["v"]
    Q, Qr = _q(d, batch)
    a = (4 * lam * r * p**4 * pu, r * pu * Q * Q, -4 * r * u * p * pv * Q, 4 * u * p * p * pr)
    b = (4 * lam * r * p**4 * pv, r * pv * Q * Q, 2 * p * p * Qr, -4 * p * pr * Q)
    return a, b


def curvature_system_residuals(descriptor: FamilyDescriptor, points: Points, lam: float):
    """Normalised residuals of the two PDEs for constant flag curvature ``lam``."""
    batch, single = _batch_off_origin(descriptor, points)
    a, b = _curvature_terms(_ruv_partials(descriptor, batch), batch, lam)
    return _out(normalized(*a), single), _out(normalized(*b), single)


def _z_partials(descriptor, batch):
    pt = phit_jet(descriptor, batch, order=2)
    return pt.value, pt.partial(0), pt.partial(1), pt.partial(0, 1), pt.partial(1, 1)


def _eq4_terms(p, p1, p2, z1, z2, lam):
    den = (4 * lam * p**4 * z2**2, p2**2 * z2**2, 4 * p2 * p * z2, 4 * p**2)
    num = (p2**3 * z2, 4 * lam * p**4 * p2 * z2, -4 * lam * p**5, 3 * p2**2 * p)
    return tuple(p1 * t for t in den) + tuple(-z1 * t for t in num)


def _eq5_terms(p, p12, p2, z1, z2, lam):
    den = (4 * lam * p**4 * z2**2, p2**2 * z2**2, 4 * p2 * p * z2, 4 * p**2)
    num = (-16 * lam**2 * p**8 * z2, 8 * lam * p**4 * p2**2 * z2, -32 * lam * p**5 * p2,
           3 * p2**4 * z2, 8 * p2**3 * p)
    return tuple(2 * p * p12 * t for t in den) + tuple(-z1 * t for t in num)


def z_reduction_residuals(descriptor: FamilyDescriptor, points: Points, lam: float,
                          z1_floor: float = 1e-3):
    """Residuals of the z-coordinate forms, cleared of their denominators."""
    batch, single = as_batch(points)
    _check_domain(descriptor, batch)
    if np.any(batch.z1 < z1_floor):
        raise SingularPointError(f"z1 below the floor {z1_floor:g}")
    p, p1, p2, p12, _ = _z_partials(descriptor, batch)
    z1, z2 = batch.z1, batch.z2
    eq4 = normalized(*_eq4_terms(p, p1, p2, z1, z2, lam))
    eq5 = normalized(*_eq5_terms(p, p12, p2, z1, z2, lam))
    return _out(eq4, single), _out(eq5, single)


def _eq6_terms(p, p2, p22, lam):
    return 3 * p2**2, -2 * p * p22, -4 * lam * p**4


def _eq7_terms(p, p2, z2, lam):
    return (z2**3 * p2**4, 8 * z2**2 * p * p2**3, 24 * z2 * p**2 * p2**2, 24 * p**3 * p2,
            16 * lam**2 * z2**3 * p**8, 32 * lam * z2 * p**6, 32 * lam * z2**2 * p**5 * p2,
            8 * lam * z2**3 * p**4 * p2**2)


BRANCH_TOL = 1e-8


@dataclass
class BranchResult:
    eq6: object
    eq7: object
    vanishing: object  # "eq6", "eq7", "both" or None per point


def branch_residuals(descriptor: FamilyDescriptor, points: Points, lam: float,
                     tol: float = BRANCH_TOL) -> BranchResult:
    batch, single = as_batch(points)
    _check_domain(descriptor, batch)
    p, _, p2, _, p22 = _z_partials(descriptor, batch)
    eq6 = normalized(*_eq6_terms(p, p2, p22, lam))
    eq7 = normalized(*_eq7_terms(p, p2, batch.z2, lam))
    which = np.where(eq6 < tol, np.where(eq7 < tol, "both", "eq6"),
                     np.where(eq7 < tol, "eq7", None))
    if single:
        return BranchResult(float(eq6[0]), float(eq7[0]), which[0])
    return BranchResult(eq6, eq7, which)


@dataclass(frozen=True)
class ResidualSample:
    point: EvalPoint
    rapcsak: float
    eq3a: float
    eq3b: float
    eq4: float
    eq5: float
    eq6: float
    eq7: float
    scale: float


def residual_samples(descriptor: FamilyDescriptor, points: Points, lam: float,
                     z1_floor: float = 1e-3) -> list[ResidualSample]:
    """All residuals at every point; ``scale`` is the metric value there."""
    batch, _ = _batch_off_origin(descriptor, points)
    rap = np.atleast_1d(rapcsak_residual(descriptor, batch))
    a, b = curvature_system_residuals(descriptor, batch, lam)
    e4, e5 = z_reduction_residuals(descriptor, batch, lam, z1_floor)
    br = branch_residuals(descriptor, batch, lam)
    F = phit_jet(descriptor, batch, order=0).value * batch.u
    return [ResidualSample(batch.point(i), float(rap[i]), float(a[i]), float(b[i]),
                           float(e4[i]), float(e5[i]), float(br.eq6[i]), float(br.eq7[i]),
                           float(abs(F[i])))
            for i in range(len(batch))]
