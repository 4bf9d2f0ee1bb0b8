"""Residual checks for the ODE lemma and the coefficient systems of the
classification, plus the cross-identities between families.

Coefficient functions are callables ``c(z1)`` that accept jets, so the
derivatives ``c1'``, ``c2'`` are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets
from .geometry import Invariants, as_batch, sample_domain
from .metrics import (_berwald, berwald_example, bryant_type_c,
                      family, metric_value, neg_pair_c)
from .pde import curvature_system_residuals, normalized

CONSTRAINT_TOL = 1e-12


class PoleError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticReciprocal:
    """y = 1 / (c1 x^2 + c2 x + c3) with c2^2 - 4 c1 c3 + 4 lam = 0."""

    c1: float
    c2: float
    c3: float
    lam: float
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.validate and abs(self.constraint_defect) > CONSTRAINT_TOL:
            raise ValueError(f"c2^2 - 4 c1 c3 + 4 lam = {self.constraint_defect:g}, not 0")

    @property
    def constraint_defect(self) -> float:
        return self.c2**2 - 4 * self.c1 * self.c3 + 4 * self.lam

    @classmethod
    def solve_c3(cls, c1: float, c2: float, lam: float) -> "QuadraticReciprocal":
        return cls(c1, c2, (c2**2 + 4 * lam) / (4 * c1), lam)

    def w(self, x):
        return self.c1 * x * x + self.c2 * x + self.c3


def ode_lemma_residual(q: QuadraticReciprocal, x_grid) -> tuple[float, float]:
    """Max |2 y y'' - 3 y'^2 + 4 lam y^4| and max |w'^2 - 2 w w'' + 4 lam|."""
    x = np.asarray(x_grid, dtype=float)
    (X,) = jets.seed([x], 2)
    w = q.w(X)
    if np.any(np.abs(w.value) < 1e-300):
        raise PoleError("c1 x^2 + c2 x + c3 vanishes on the grid")
    y = 1.0 / w
    y0, y1, y2 = y.value, y.partial(0), y.partial(0, 0)
    w0, w1, w2 = w.value, w.partial(0), w.partial(0, 0)
    res_y = np.abs(2 * y0 * y2 - 3 * y1**2 + 4 * q.lam * y0**4)
    res_w = np.abs(w1**2 - 2 * w0 * w2 + 4 * q.lam)
    return float(res_y.max()), float(res_w.max())


def _coeff_jets(c1_fn, c2_fn, z1_grid):
    z = np.asarray(z1_grid, dtype=float)
    (Z,) = jets.seed([z], 1)
    c1 = c1_fn(Z)
    c2 = c2_fn(Z)
    if not isinstance(c2, jets.Jet):
        c2 = jets.Jet.constant(np.broadcast_to(c2, z.shape), Z.space)
    if not isinstance(c1, jets.Jet):
        c1 = jets.Jet.constant(np.broadcast_to(c1, z.shape), Z.space)
    return z, c1.value, c1.partial(0), c2.value, c2.partial(0)


@dataclass
class SystemResidual:
    equations: tuple[float, float, float]
    reduced: tuple[float, ...] = ()
    expanded: float = 0.0

    @property
    def max(self) -> float:
        return max(self.equations + self.reduced + (self.expanded,))


def k1_system_residual(c1_fn: Callable, c2_fn: Callable, z1_grid) -> SystemResidual:
    """Three-equation K = 1 coefficient system and its reduced first-order pair."""
    z, a, da, b, db = _coeff_jets(c1_fn, c2_fn, z1_grid)
    if np.any(a <= 0):
        raise ValueError("c1 must be positive on the grid")
    s = a**2 + b**2
    # expanded form, one equation per power of z2
    x1 = normalized(z * a, -da * b**2, -da * a**2)
    x2 = normalized(-2 * da * a**2 * b, 2 * a * b**2 * db, -2 * da * b**3,
                    2 * a**3 * db, 4 * z * a * b)
    x3 = normalized(-da * b**4, 2 * a * b**3 * db, 2 * a**3 * b * db,
                    3 * z * a * b**2, a**4 * da, -z * a**3)
    # factored rewrite
    e1 = normalized(da * s, -z * a)
    e2 = normalized(da * b * s, -a * db * s, -2 * z * a * b)
    e3 = normalized(da * (a**4 - b**4), 2 * db * a * b * s, 3 * z * a * b**2, -z * a**3)
    r1 = normalized(da * s, -z * a)
    r2 = normalized(db * s, z * b)
    expanded = max(x1.max(), x2.max(), x3.max())
    return SystemResidual((e1.max(), e2.max(), e3.max()), (r1.max(), r2.max()), expanded)


def k_neg1_system_residual(c1_fn: Callable, c2_fn: Callable, z1_grid) -> SystemResidual:
    """Three-equation K = -1 coefficient system."""
    z, a, da, b, db = _coeff_jets(c1_fn, c2_fn, z1_grid)
    if np.any(a <= 0):
        raise ValueError("c1 must be positive on the grid")
    e1 = normalized(-z * a, da * b**2, -da * a**2)
    e2 = normalized(-2 * da * a**2 * b, -2 * a * b**2 * db, 2 * da * b**3,
                    2 * a**3 * db, -4 * z * a * b)
    e3 = normalized(da * b**4, -2 * a * b**3 * db, 2 * a**3 * b * db,
                    -3 * z * a * b**2, -a**4 * da, -z * a**3)
    return SystemResidual((e1.max(), e2.max(), e3.max()))


def k0_system_residual(c1_fn: Callable, c2_fn: Callable, z1_grid) -> SystemResidual:
    """Pair of K = 0 coefficient equations."""
    z, a, da, b, db = _coeff_jets(c1_fn, c2_fn, z1_grid)
    e1 = normalized(z * a, b**2 * da)
    e2 = normalized(3 * z * a * b, b**3 * da, 2 * a * b**2 * db)
    return SystemResidual((e1.max(), e2.max(), 0.0))


# -- closed-form coefficient functions ---------------------------------------

def spherical_coeffs(c: float):
    """c1 = sqrt(z1^2 + c), c2 = 0 (K = 1, projective spherical)."""
    return (lambda z: jets.sqrt(z * z + c)), (lambda z: 0.0 * z)


def bryant_type_coeffs(d1: float, d2: float, sign: int = 1):
    return (lambda z: bryant_type_c(z * z, d1, d2, sign)[0],
            lambda z: bryant_type_c(z * z, d1, d2, sign)[1])


def klein_coeffs(c: float):
    """c1 = sqrt(c - z1^2), c2 = 0 (K = -1, Klein)."""
    return (lambda z: jets.sqrt(c - z * z)), (lambda z: 0.0 * z)


def neg_pair_coeffs(d1: float, d2: float, sign: int = 1):
    return (lambda z: neg_pair_c(z * z, d1, d2, sign)[0],
            lambda z: neg_pair_c(z * z, d1, d2, sign)[1])


def berwald_coeffs(c: float, d: float = 1.0, sign: int = 1):
    """c1 = d sqrt(c - z1^2), c2 = +/- sqrt(c - z1^2) (K = 0, Berwald)."""
    return (lambda z: d * jets.sqrt(c - z * z)), (lambda z: sign * jets.sqrt(c - z * z))


def safe_grid(lo: float, hi: float, count: int = 200, rel_margin: float = 1e-3) -> np.ndarray:
    """Grid on [lo, hi] pulled in by a relative margin at a radicand boundary."""
    return np.linspace(lo, hi * (1 - rel_margin), count)


# -- conserved quantities ----------------------------------------------------

@dataclass
class ConservedReport:
    checks: dict[str, float]

    @property
    def max_drift(self) -> float:
        return max(self.checks.values())


def conserved_quantities(family_id: str, params: dict, z1_grid,
                         c1_scale: float = 1.0) -> ConservedReport:
    """Drift of the first integrals along the grid.

    ``c1_scale`` multiplies c1 (c2 for the Berwald case) as a negative control.
    """
    z = np.asarray(z1_grid, dtype=float)
    fid = family_id.replace("-", "_")
    sign = params.get("sign", 1)
    if fid == "bryant_type":
        d1, d2 = params["d1"], params["d2"]
        c1, c2 = bryant_type_c(z * z, d1, d2, sign)
        c1 = c1_scale * c1
        return ConservedReport({
            "c1*c2 - sign*d1": float(np.max(np.abs(c1 * c2 - sign * d1))),
            "c1^2 - c2^2 - (2 d2 + z1^2)": float(np.max(np.abs(c1**2 - c2**2 - (2 * d2 + z * z)))),
        })
    if fid == "neg_pair":
        d1, d2 = params["d1"], params["d2"]
        c1, c2 = neg_pair_c(z * z, d1, d2, sign)
        c1 = c1_scale * c1
        return ConservedReport({
            "c1*c2 - sign*d1": float(np.max(np.abs(c1 * c2 - sign * d1))),
            "c1^2 + c2^2 - (2 d2 - z1^2)": float(np.max(np.abs(c1**2 + c2**2 - (2 * d2 - z * z)))),
        })
    if fid == "berwald":
        c = params["c"]
        (Z,) = jets.seed([z], 1)
        c2 = c1_scale * sign * jets.sqrt(c - Z * Z)
        return ConservedReport({
            "c2*c2' + z1": float(np.max(np.abs(c2.value * c2.partial(0) + z))),
        })
    raise ValueError(f"no conserved quantities recorded for {family_id!r}")


# -- remark cross-checks -----------------------------------------------------

@dataclass
class Check:
    check: str
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_residual < self.tolerance)


def bryant_remark_parameters(alpha: float) -> tuple[float, float]:
    """Literal (d1, d2): d1 = sin^2(2 alpha)/4, d2 = cos(2 alpha)/2."""
    return 0.25 * math.sin(2 * alpha) ** 2, 0.5 * math.cos(2 * alpha)


def bryant_matching_parameters(alpha: float) -> tuple[float, float, int]:
    """(d1, d2, sign) that reproduce the Bryant metric: d1^2 = sin^2(2 alpha)/4."""
    return 0.5 * math.sin(2 * alpha), 0.5 * math.cos(2 * alpha), -1


bryant_remark_parameters.check_name = "bryant_type(sin^2(2a)/4, cos(2a)/2) == bryant_classic(a)"
bryant_matching_parameters.check_name = "bryant_type(sin(2a)/2, cos(2a)/2, minus) == bryant_classic(a)"


REMARK_ANGLES = (math.pi / 12, math.pi / 6, math.pi / 5)


def _bryant_agreement(d1, d2, signs, alpha, points=100, seed=0, n=3):
    """Max |bryant_type - bryant_classic| on a sample, best of the given branches."""
    ref = family("bryant_classic", n, alpha=alpha)
    pts = sample_domain(ref, points, seed, z1_floor=0.0)
    F_ref = metric_value(ref, pts)
    errs = [np.max(np.abs(metric_value(family("bryant_type", n, d1=d1, d2=d2, sign=s), pts) - F_ref))
            for s in signs]
    return float(min(errs))


def bryant_remark_check(parameters=bryant_remark_parameters, angles=REMARK_ANGLES,
                        points=100, tol=1e-10) -> Check:
    """Max |bryant_type - bryant_classic| over the angles, best sign branch."""
    worst = 0.0
    for alpha in angles:
        d1, d2, *sign = parameters(alpha)
        worst = max(worst, _bryant_agreement(d1, d2, sign or (1, -1), alpha, points))
    name = getattr(parameters, "check_name", "bryant_type(d1, d2) == bryant_classic(alpha)")
    return Check(name, worst, tol)


def berwald_remark_check(points=100, seed=0, tol=1e-12) -> Check:
    """Classification form with c = 1 against the closed Berwald example.

    The '+' branch of the classification form matches the closed form with
    '-<x,y>' and vice versa.
    """
    fam = family("berwald", 3, c=1.0)
    pts = sample_domain(fam, points, seed, z1_floor=0.0)
    b, _ = as_batch(pts)
    inv = Invariants.from_xy(list(b.x.T), list(b.y.T))
    inv_rev = Invariants.from_xy(list(b.x.T), list(-b.y.T))
    closed = berwald_example(inv)                 # +<x,y> in the numerator
    family_minus = _berwald(inv, 1.0, -1)
    family_plus_rev = _berwald(inv_rev, 1.0, 1)  # F+(x, -y) = F-(x, y)
    err = np.maximum(np.abs(closed - family_minus) / closed,
                     np.abs(closed - family_plus_rev) / closed)
    return Check("berwald(c=1) == closed Berwald example", float(err.max()), tol)


def randers_funk_check(points=100, seed=0, tol=1e-9) -> list[Check]:
    """randers_k_neg1(c=1, +) is half the Funk metric and has K = -1."""
    funk = family("funk", 3)
    rk = family("randers_k_neg1", 3, c=1.0, sign=1)
    pts = sample_domain(funk, points, seed)
    Ff = metric_value(funk, pts)
    Fr = metric_value(rk, pts)
    ratio = float(np.max(np.abs(Ff / Fr - 2.0)))
    # K scales by 1/s^2 under F -> s F: (-1/4) / (1/2)^2 = -1
    lam = funk.lam / 0.5**2
    a, b = curvature_system_residuals(rk, pts, lam)
    return [Check("funk / randers_k_neg1(c=1) == 2", ratio, tol),
            Check("randers_k_neg1(c=1) curvature residual at K = -1", float(max(a.max(), b.max())), tol)]


def remark_cross_checks() -> list[Check]:
    return [bryant_remark_check(), bryant_remark_check(bryant_matching_parameters),
            berwald_remark_check(), *randers_funk_check()]
