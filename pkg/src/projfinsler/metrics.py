"""Projective spherically symmetric Finsler metrics of constant flag curvature.

Every family is a function of :class:`~projfinsler.geometry.Invariants`, so
the same code evaluates plain values, jets in ``(r, u, v)``, jets of
``phi~(z1, z2) = F/|y|`` and jets in the ambient components ``(x, y)``.
The constant-curvature families are written natively in
``(z1^2, z2)``; the classical examples use their closed ``(x, y)`` forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from scipy import integrate

from . import jets
from .geometry import Invariants, Points, as_batch, jet_lift
from .jets import Jet


class ParameterError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class FamilyDescriptor:
    family_id: str
    params: dict = field(default_factory=dict)
    lam: Optional[float] = None
    domain_radius: float = math.inf
    n: int = 3

    def evaluate(self, inv: Invariants):
        return _FAMILIES[self.family_id](inv, **self.params)

    def label(self) -> str:
        if not self.params:
            return self.family_id
        parts = []
        for k, val in self.params.items():
            if callable(val):
                continue
            parts.append(f"{k}={val:g}")
        return f"{self.family_id}({', '.join(parts)})"

    def scalar_params(self) -> dict:
        return {k: v for k, v in self.params.items() if not callable(v)}

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        r = np.linalg.norm(np.atleast_2d(x), axis=-1)
        return r < self.domain_radius * (1.0 - margin)

    def with_dim(self, n: int) -> "FamilyDescriptor":
        return FamilyDescriptor(self.family_id, dict(self.params), self.lam,
                                self.domain_radius, n)


# -- family formulas -------------------------------------------------------

def _euclidean(inv):
    return inv.u


def _berwald(inv, c, sign):
    a = jets.sqrt(c - inv.w)
    s = inv.z2 + sign * a
    return inv.u / (a * s * s)


def berwald_example(inv):
    """Closed (x, y) form of the Berwald metric on the unit ball."""
    root = jets.sqrt(inv.uu - inv.cross)
    num = root + inv.v
    den = 1.0 - inv.rr
    return num * num / (den * den * root)


def _projective_spherical(inv):
    return jets.sqrt(inv.uu + inv.cross) / (1.0 + inv.rr)


def _bryant_classic(inv, alpha):
    c2a, s2a = math.cos(2 * alpha), math.sin(2 * alpha)
    B = c2a * inv.uu + inv.cross
    s_uu = s2a * inv.uu
    A = B * B + s_uu * s_uu
    C = s2a * inv.v
    D = inv.rr * inv.rr + 2 * c2a * inv.rr + 1.0
    CD = C / D
    return jets.sqrt((jets.sqrt(A) + B) / (2.0 * D) + CD * CD) + CD


def _klein(inv, c):
    return jets.sqrt(c * inv.uu - inv.cross) / (c - inv.rr)


def _funk(inv):
    return (jets.sqrt(inv.uu - inv.cross) + inv.v) / (1.0 - inv.rr)


def _randers_k_neg1(inv, c, sign):
    return (jets.sqrt(c * inv.uu - inv.cross) + sign * inv.v) / (2.0 * (c - inv.rr))


def bryant_type_c(w, d1, d2, sign):
    """(c1, c2) of the K=1 Bryant-type family as functions of w = z1^2."""
    P = 2 * d2 + w
    S = jets.sqrt(P * P + 4 * d1 * d1)
    c1 = math.sqrt(2) / 2 * jets.sqrt(P + S)
    c2 = sign * (math.sqrt(2) / 2) * jets.sqrt(S - P)
    return c1, c2


def neg_pair_c(w, d1, d2, sign):
    """(c1, c2) of the new K=-1 family as functions of w = z1^2."""
    P = 2 * d2 - w
    R = jets.sqrt(P * P - 4 * d1 * d1)
    c1 = math.sqrt(2) / 2 * jets.sqrt(P + R)
    c2 = sign * (math.sqrt(2) / 2) * jets.sqrt(P - R)
    return c1, c2


def _bryant_type(inv, d1, d2, sign):
    c1, c2 = bryant_type_c(inv.w, d1, d2, sign)
    s = inv.z2 + c2
    return inv.u * c1 / (c1 * c1 + s * s)


def _neg_pair(inv, d1, d2, sign):
    c1, c2 = neg_pair_c(inv.w, d1, d2, sign)
    s = inv.z2 + c2
    return inv.u * c1 / (c1 * c1 - s * s)


# Gauss-Kronrod tolerances for the integral-form metric
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12


def _integral_form(inv, f, g):
    # phi = int_0^u f(v^2/s^2 - r^2) ds + g(r) v, with s = u*tau on [0, 1]
    u, v, uu, rr = inv.u, inv.v, inv.uu, inv.rr
    vv = v * v

    def integrand(tau):
        val = u * f(vv / (uu * (tau * tau)) - rr)
        return val

    probe = integrand(0.5)
    if isinstance(probe, Jet):
        space, shape = probe.space, probe.coef.shape

        def flat(tau):
            val = integrand(tau)
            if not isinstance(val, Jet):
                val = Jet.constant(np.broadcast_to(val, shape[1:]), space)
            return np.broadcast_to(val.coef, shape).ravel()

        res, err = integrate.quad_vec(flat, 0.0, 1.0, epsabs=QUAD_EPSABS,
                                      epsrel=QUAD_EPSREL, norm="max", limit=2000)
        if not np.all(np.isfinite(res)):
            raise ArithmeticError("integral-form quadrature failed")
        phi = Jet(space, res.reshape(shape))
    else:
        shape = np.shape(probe)
        res, err = integrate.quad_vec(lambda t: np.ravel(integrand(t)), 0.0, 1.0,
                                      epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                                      norm="max", limit=2000)
        phi = res.reshape(shape)
    return phi + g(inv.r) * v


def _custom(inv, fn):
    return fn(inv)


_FAMILIES: dict[str, Callable] = {
    "euclidean": _euclidean,
    "berwald": _berwald,
    "projective_spherical": _projective_spherical,
    "bryant_classic": _bryant_classic,
    "klein": _klein,
    "funk": _funk,
    "randers_k_neg1": _randers_k_neg1,
    "bryant_type": _bryant_type,
    "neg_pair": _neg_pair,
    "integral_form": _integral_form,
    "custom": _custom,
}

FAMILY_IDS = tuple(k for k in _FAMILIES if k != "custom")
SIGNED_FAMILIES = ("berwald", "randers_k_neg1", "bryant_type", "neg_pair")


def _positive(name, value):
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise ParameterError(f"{name} must be positive, got {value:g}")
    return value


def _sign(sign):
    if sign in (1, "+", "plus", 1.0):
        return 1
    if sign in (-1, "-", "minus", -1.0):
        return -1
    raise ParameterError(f"sign must be plus or minus, got {sign!r}")


def _dim(n):
    n = int(n)
    if n < 2:
        raise ParameterError(f"dimension must be at least 2, got {n}")
    return n


def family(family_id: str, n: int = 3, **params: Any) -> FamilyDescriptor:
    """Validated descriptor for one of the metric families.

    Parameters per family: ``berwald(c, sign)``, ``bryant_classic(alpha)``,
    ``klein(c)``, ``randers_k_neg1(c, sign)``, ``bryant_type(d1, d2, sign)``,
    ``neg_pair(d1, d2, sign)``, ``integral_form(f, g)``; the sign defaults to +1.
    """
    fid = family_id.replace("-", "_")
    n = _dim(n)

    def take(*names):
        extra = set(params) - set(names)
        if extra:
            raise ParameterError(f"{fid} does not take parameters {sorted(extra)}")

    if fid in ("euclidean", "projective_spherical", "funk"):
        take()
        lam = {"euclidean": 0.0, "projective_spherical": 1.0, "funk": -0.25}[fid]
        radius = 1.0 if fid == "funk" else math.inf
        return FamilyDescriptor(fid, {}, lam, radius, n)
    if fid in ("berwald", "klein", "randers_k_neg1"):
        take("c", "sign")
        c = _positive("c", params.get("c", 1.0))
        p = {"c": c}
        if fid != "klein":
            p["sign"] = _sign(params.get("sign", 1))
        elif "sign" in params:
            raise ParameterError("klein does not take a sign")
        lam = 0.0 if fid == "berwald" else -1.0
        return FamilyDescriptor(fid, p, lam, math.sqrt(c), n)
    if fid == "bryant_classic":
        take("alpha")
        alpha = float(params.get("alpha", 0.0))
        if not 0 <= alpha < math.pi / 2:
            raise ParameterError(f"alpha must lie in [0, pi/2), got {alpha:g}")
        return FamilyDescriptor(fid, {"alpha": alpha}, 1.0, math.inf, n)
    if fid == "bryant_type":
        take("d1", "d2", "sign")
        d1 = _positive("d1", params.get("d1", 1.0))
        d2 = float(params.get("d2", 0.0))
        if not math.isfinite(d2):
            raise ParameterError("d2 must be finite")
        return FamilyDescriptor(fid, {"d1": d1, "d2": d2, "sign": _sign(params.get("sign", 1))},
                                1.0, math.inf, n)
    if fid == "neg_pair":
        take("d1", "d2", "sign")
        d1 = _positive("d1", params.get("d1", 0.1))
        d2 = _positive("d2", params.get("d2", 0.6))
        if not d2 > d1:
            raise ParameterError(f"neg_pair requires d2 > d1 > 0, got d1={d1:g}, d2={d2:g}")
        return FamilyDescriptor(fid, {"d1": d1, "d2": d2, "sign": _sign(params.get("sign", 1))},
                                -1.0, math.sqrt(2 * (d2 - d1)), n)
    if fid == "integral_form":
        take("f", "g")
        f = params.get("f", lambda t: 1.0)
        g = params.get("g", lambda r: 0.0)
        if not (callable(f) and callable(g)):
            raise ParameterError("integral_form needs callables f(t) and g(r)")
        return FamilyDescriptor(fid, {"f": f, "g": g}, None, math.inf, n)
    raise ParameterError(f"unknown family {family_id!r}")


def custom_family(fn: Callable[[Invariants], Any], lam: Optional[float] = None,
                  domain_radius: float = math.inf, n: int = 3) -> FamilyDescriptor:
    """Descriptor for an ad hoc metric ``fn(invariants)`` (used for controls)."""
    return FamilyDescriptor("custom", {"fn": fn}, lam, domain_radius, _dim(n))


def all_variants(n: int = 3) -> list[FamilyDescriptor]:
    """One descriptor per family and sign branch with representative parameters."""
    out = [family("euclidean", n)]
    for s in (1, -1):
        out.append(family("berwald", n, c=1.0, sign=s))
    out.append(family("projective_spherical", n))
    out.append(family("bryant_classic", n, alpha=math.pi / 6))
    out.append(family("klein", n, c=1.0))
    out.append(family("funk", n))
    for s in (1, -1):
        out.append(family("randers_k_neg1", n, c=1.0, sign=s))
    for s in (1, -1):
        out.append(family("bryant_type", n, d1=1.0, d2=0.3, sign=s))
    for s in (1, -1):
        out.append(family("neg_pair", n, d1=0.1, d2=0.6, sign=s))
    return out


# -- evaluation ------------------------------------------------------------

@dataclass
class MetricValue:
    F: Any
    phi: Optional[Jet] = None
    phit: Optional[Jet] = None


def _check_domain(descriptor: FamilyDescriptor, batch):
    if np.isfinite(descriptor.domain_radius) and np.any(batch.r >= descriptor.domain_radius):
        raise DomainError(f"point outside the domain of {descriptor.label()}")


def metric_value(descriptor: FamilyDescriptor, points: Points):
    """F at each point (array for a batch, float for a single point)."""
    batch, single = as_batch(points)
    _check_domain(descriptor, batch)
    F = np.asarray(descriptor.evaluate(Invariants.from_xy(list(batch.x.T), list(batch.y.T))))
    return float(F[0]) if single else F


def phi_jet(descriptor: FamilyDescriptor, points: Points, order: int = 2) -> Jet:
    r, u, v = jet_lift(points, "ruv", order)
    return _as_jet(descriptor.evaluate(Invariants.from_ruv(r, u, v)), r)


def phit_jet(descriptor: FamilyDescriptor, points: Points, order: int = 2) -> Jet:
    z1, z2 = jet_lift(points, "z", order)
    return _as_jet(descriptor.evaluate(Invariants.from_z(z1, z2)), z1)


def _as_jet(val, like: Jet) -> Jet:
    if isinstance(val, Jet):
        return val
    return Jet.constant(np.broadcast_to(val, like.batch_shape), like.space)


def phi_eval(descriptor: FamilyDescriptor, points: Points, order: int = 2) -> MetricValue:
    batch, single = as_batch(points)
    _check_domain(descriptor, batch)
    F = metric_value(descriptor, points)
    if order == 0:
        return MetricValue(F)
    return MetricValue(F, phi_jet(descriptor, points, order), phit_jet(descriptor, points, order))


def bryant_type_coefficients(d1: float, d2: float, z1, branch_sign: int = 1):
    _positive("d1", d1)
    return bryant_type_c(np.asarray(z1, dtype=float) ** 2, d1, d2, _sign(branch_sign))


def neg_pair_coefficients(d1: float, d2: float, z1, branch_sign: int = 1):
    _positive("d1", d1)
    _positive("d2", d2)
    if not d2 > d1:
        raise ParameterError("neg_pair coefficients require d2 > d1 > 0")
    z1 = np.asarray(z1, dtype=float)
    if np.any(z1 * z1 >= 2 * (d2 - d1)):
        raise ValueError("negative radicand: z1^2 must stay below 2(d2 - d1)")
    return neg_pair_c(z1 * z1, d1, d2, _sign(branch_sign))


def integral_form_metric(f: Callable, g: Callable, points: Points, order: int = 2) -> MetricValue:
    return phi_eval(family("integral_form", n=as_batch(points)[0].n, f=f, g=g), points, order)
