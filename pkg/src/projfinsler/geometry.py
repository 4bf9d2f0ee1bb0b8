"""Invariant coordinates of a tangent vector and deterministic sampling.

A spherically symmetric metric depends on ``(x, y)`` only through
``r = |x|``, ``u = |y|`` and ``v = <x, y>``.  The classification formulas
are written in the rotated coordinates ``z2 = v/u`` and
``z1 = sqrt(r^2 - z2^2)``, i.e. the components of ``x`` along and across
the direction of ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import jets
from .jets import Jet


class ZeroDirectionError(ValueError):
    pass


class EmptyDomainError(ValueError):
    pass


def _cross_term(x, y):
    """|x|^2 |y|^2 - <x,y>^2 via the Lagrange identity (never negative)."""
    n = len(x)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = x[i] * y[j] - x[j] * y[i]
            total = total + d * d
    return total


@dataclass(frozen=True)
class EvalPoint:
    x: np.ndarray
    y: np.ndarray
    r: float
    u: float
    v: float
    z1: float
    z2: float

    @property
    def n(self) -> int:
        return len(self.x)


def invariants_from(x, y) -> EvalPoint:
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be vectors of equal length")
    u = float(np.linalg.norm(y))
    if u == 0.0:
        raise ZeroDirectionError("direction y must be non-zero")
    r = float(np.linalg.norm(x))
    v = float(x @ y)
    z1 = float(np.sqrt(_cross_term(x, y))) / u
    x.setflags(write=False)
    y.setflags(write=False)
    return EvalPoint(x=x, y=y, r=r, u=u, v=v, z1=z1, z2=v / u)


@dataclass(frozen=True)
class PointBatch:
    """Stacked :class:`EvalPoint` data; every field has a leading batch axis."""

    x: np.ndarray
    y: np.ndarray
    r: np.ndarray
    u: np.ndarray
    v: np.ndarray
    z1: np.ndarray
    z2: np.ndarray

    def __len__(self):
        return len(self.r)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def point(self, i: int) -> EvalPoint:
        return EvalPoint(self.x[i], self.y[i], float(self.r[i]), float(self.u[i]),
                         float(self.v[i]), float(self.z1[i]), float(self.z2[i]))

    def subset(self, mask) -> "PointBatch":
        return PointBatch(*(getattr(self, f)[mask] for f in
                            ("x", "y", "r", "u", "v", "z1", "z2")))


Points = Union[EvalPoint, Sequence[EvalPoint], PointBatch]


def as_batch(points: Points) -> tuple[PointBatch, bool]:
    """Normalise ``points`` to a batch; the flag says a single point was given."""
    if isinstance(points, PointBatch):
        return points, False
    if isinstance(points, EvalPoint):
        points = [points]
        single = True
    else:
        single = False
        if len(points) == 0:
            raise ValueError("empty point list")
    batch = PointBatch(
        x=np.array([p.x for p in points]),
        y=np.array([p.y for p in points]),
        r=np.array([p.r for p in points]),
        u=np.array([p.u for p in points]),
        v=np.array([p.v for p in points]),
        z1=np.array([p.z1 for p in points]),
        z2=np.array([p.z2 for p in points]),
    )
    return batch, single


def batch_from_xy(x, y) -> PointBatch:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    u = np.linalg.norm(y, axis=1)
    if np.any(u == 0):
        raise ZeroDirectionError("direction y must be non-zero")
    v = np.einsum("bi,bi->b", x, y)
    z1 = np.sqrt(_cross_term(x.T, y.T)) / u
    return PointBatch(x, y, np.linalg.norm(x, axis=1), u, v, z1, v / u)


def squeeze(values, single: bool):
    if single:
        return float(np.asarray(values).reshape(-1)[0])
    return values


class Invariants:
    """The scalar invariants a spherically symmetric metric is built from.

    Entries are jets or plain arrays depending on how the instance was built.
    ``cross`` is ``|x|^2|y|^2 - <x,y>^2`` and ``w = cross/|y|^2 = z1^2``.
    """

    def __init__(self, rr, uu, u, v, cross, w=None, z2=None, r=None):
        self.rr = rr
        self.uu = uu
        self.u = u
        self.v = v
        self.cross = cross
        self._w = w
        self._z2 = z2
        self._r = r

    @cached_property
    def w(self):
        return self._w if self._w is not None else self.cross / self.uu

    @cached_property
    def z2(self):
        return self._z2 if self._z2 is not None else self.v / self.u

    @cached_property
    def r(self):
        return self._r if self._r is not None else jets.sqrt(self.rr)

    @classmethod
    def from_ruv(cls, r, u, v) -> "Invariants":
        rr = r * r
        uu = u * u
        return cls(rr, uu, u, v, rr * uu - v * v, r=r)

    @classmethod
    def from_z(cls, z1, z2) -> "Invariants":
        """Invariants at unit |y|, for evaluating phi-tilde(z1, z2)."""
        w = z1 * z1
        rr = w + z2 * z2
        return cls(rr, 1.0, 1.0, z2, w, w=w, z2=z2)

    @classmethod
    def from_xy(cls, xs, ys) -> "Invariants":
        """Invariants from component lists (jets or arrays) of x and y."""
        rr = sum(a * a for a in xs)
        uu = sum(b * b for b in ys)
        v = sum(a * b for a, b in zip(xs, ys))
        return cls(rr, uu, jets.sqrt(uu), v, _cross_term(xs, ys))


JET_VARIABLES = ("ruv", "z", "xy", "y")


def jet_lift(point: Points, variables: str = "ruv", order: int = 2):
    """Seed jets for the chosen coordinate system at ``point``.

    ``variables`` is one of ``"ruv"`` (r, u, v), ``"z"`` (z1, z2), ``"xy"``
    (all components of x then y) or ``"y"`` (components of y only).
    """
    batch, single = as_batch(point)
    sel = 0 if single else slice(None)
    if variables == "ruv":
        return jets.seed([batch.r[sel], batch.u[sel], batch.v[sel]], order)
    if variables == "z":
        return jets.seed([batch.z1[sel], batch.z2[sel]], order)
    if variables == "xy":
        cols = [batch.x[sel, i] for i in range(batch.n)]
        cols += [batch.y[sel, i] for i in range(batch.n)]
        return jets.seed(cols, order)
    if variables == "y":
        return jets.seed([batch.y[sel, i] for i in range(batch.n)], order)
    raise ValueError(f"unknown jet variables {variables!r}; expected one of {JET_VARIABLES}")


DEFAULT_Z1_FLOOR = 1e-3
DEFAULT_MARGIN = 0.05
# |x| range used for families defined on all of R^n
UNBOUNDED_SAMPLE_RADIUS = 2.0


def sampling_radius(descriptor, margin: float = DEFAULT_MARGIN) -> float:
    R = descriptor.domain_radius
    if not np.isfinite(R):
        return UNBOUNDED_SAMPLE_RADIUS
    return R * (1.0 - margin)


def sample_domain(descriptor, count: int, seed: int = 0,
                  z1_floor: float = DEFAULT_Z1_FLOOR,
                  margin: float = DEFAULT_MARGIN, n: int | None = None) -> list[EvalPoint]:
    """Deterministic interior samples with unit directions.

    ``x`` is uniform in the ball of radius ``R(1 - margin)`` (``R`` the domain
    radius), ``y`` uniform on the unit sphere; pairs with ``z1 < z1_floor``
    are rejected and redrawn.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    n = descriptor.n if n is None else n
    R = descriptor.domain_radius
    if not R > 0:
        raise EmptyDomainError(f"domain of {descriptor.family_id} has no interior point")
    rad = sampling_radius(descriptor, margin)
    if rad <= z1_floor:
        raise EmptyDomainError("sampling ball is smaller than the z1 floor")

    rng = np.random.default_rng(seed)
    out: list[EvalPoint] = []
    while len(out) < count:
        need = count - len(out)
        dirs = rng.standard_normal((need, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = rad * rng.random(need) ** (1.0 / n)
        xs = dirs * radii[:, None]
        ys = rng.standard_normal((need, n))
        ys /= np.linalg.norm(ys, axis=1, keepdims=True)
        for x, y in zip(xs, ys):
            p = invariants_from(x, y)
            if p.z1 >= z1_floor and p.r > 0:
                out.append(p)
    return out


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class Flag:
    point: EvalPoint
    V: np.ndarray = field()

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        if V.shape != self.point.y.shape:
            raise ValueError("flag edge must have the dimension of y")
        if np.linalg.matrix_rank(np.stack([self.point.y, V]), tol=1e-12) < 2:
            raise ValueError("degenerate flag: V is parallel to y")
        object.__setattr__(self, "V", V)
