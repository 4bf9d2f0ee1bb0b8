"""Truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet` stores the Taylor coefficients ``c_a = (d^a f)(x0) / a!`` of a
function of ``nvars`` variables, truncated at total degree ``order``.  The
coefficient array has shape ``(N,) + batch`` so a single jet carries the
expansion at a whole batch of base points; every operation is vectorised
over the batch.

Monomials are enumerated by total degree and lexicographically inside each
degree, so the monomials of a lower order are always a prefix of those of a
higher order with the same number of variables.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

MAX_ORDER = 4


class JetOrderError(ValueError):
    pass


class JetSpace:
    """Monomial tables for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError("a jet needs at least one variable")
        if not 0 <= order <= MAX_ORDER:
            raise JetOrderError(f"jet order must be in [0, {MAX_ORDER}], got {order}")
        self.nvars = nvars
        self.order = order

        monos = []
        counts = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                e = [0] * nvars
                for k in combo:
                    e[k] += 1
                monos.append(tuple(e))
            counts.append(len(monos))
        self.monomials = monos
        self.size = len(monos)
        # number of monomials of degree <= d
        self.count_upto = counts
        self.index = {e: i for i, e in enumerate(monos)}
        self.degree = np.array([sum(e) for e in monos])
        self.factorial = np.array(
            [math.prod(math.factorial(a) for a in e) for e in monos], dtype=float
        )

        left, right, target = [], [], []
        for i, a in enumerate(monos):
            for j in range(counts[order - sum(a)]):
                b = monos[j]
                left.append(i)
                right.append(j)
                target.append(self.index[tuple(p + q for p, q in zip(a, b))])
        perm = np.argsort(np.array(target), kind="stable")
        self._left = np.array(left)[perm]
        self._right = np.array(right)[perm]
        targets = np.array(target)[perm]
        self._starts = np.searchsorted(targets, np.arange(self.size))

    def __repr__(self):
        return f"JetSpace(nvars={self.nvars}, order={self.order})"

    def mul_coef(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = a[self._left] * b[self._right]
        return np.add.reduceat(prod, self._starts, axis=0)

    @lru_cache(maxsize=None)
    def _diff_table(self, k: int):
        lower = jet_space(self.nvars, self.order - 1)
        src = np.empty(lower.size, dtype=int)
        fac = np.empty(lower.size)
        for i, e in enumerate(lower.monomials):
            up = list(e)
            up[k] += 1
            src[i] = self.index[tuple(up)]
            fac[i] = up[k]
        return lower, src, fac

    def multi_index(self, variables) -> tuple:
        e = [0] * self.nvars
        for k in variables:
            e[k] += 1
        return tuple(e)


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


def _batch_shape(value) -> tuple:
    return np.shape(value)


class Jet:
    """Truncated Taylor expansion, vectorised over a batch of base points."""

    __slots__ = ("space", "coef")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, space: JetSpace, coef: np.ndarray):
        self.space = space
        self.coef = coef

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, space: JetSpace) -> "Jet":
        value = np.asarray(value, dtype=float)
        coef = np.zeros((space.size,) + value.shape)
        coef[0] = value
        return cls(space, coef)

    @classmethod
    def variable(cls, value, k: int, space: JetSpace) -> "Jet":
        if not 0 <= k < space.nvars:
            raise IndexError(f"variable index {k} out of range for {space}")
        jet = cls.constant(value, space)
        if space.order >= 1:
            jet.coef[1 + k] = 1.0
        return jet

    # -- inspection -------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.coef[0]

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def batch_shape(self) -> tuple:
        return self.coef.shape[1:]

    def partial(self, *variables: int) -> np.ndarray:
        """Mixed partial derivative, e.g. ``partial(0, 0, 1)`` = d^3/dx0^2 dx1."""
        if len(variables) > self.order:
            raise JetOrderError(
                f"derivative of order {len(variables)} exceeds jet order {self.order}"
            )
        e = self.space.multi_index(variables)
        i = self.space.index[e]
        return self.coef[i] * self.space.factorial[i]

    def gradient(self) -> np.ndarray:
        """First partials with the variable axis last: shape ``batch + (m,)``."""
        m = self.space.nvars
        return np.moveaxis(self.coef[1 : 1 + m], 0, -1)

    def hessian(self) -> np.ndarray:
        m = self.space.nvars
        out = np.empty(self.batch_shape + (m, m))
        for i in range(m):
            for j in range(i, m):
                out[..., i, j] = out[..., j, i] = self.partial(i, j)
        return out

    def diff(self, k: int) -> "Jet":
        """Derivative with respect to variable ``k`` as a jet of one order less."""
        if self.order == 0:
            raise JetOrderError("cannot differentiate an order-0 jet")
        lower, src, fac = self.space._diff_table(k)
        fac = fac.reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(lower, self.coef[src] * fac)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetOrderError("cannot raise the order of a jet by truncation")
        space = jet_space(self.space.nvars, order)
        return Jet(space, self.coef[: space.size])

    def __repr__(self):
        return f"Jet({self.space.nvars} vars, order {self.order}, value={self.value!r})"

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "Jet"):
        if other.space is not self.space:
            raise ValueError(f"jet spaces differ: {self.space} vs {other.space}")

    def _with_constant(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        shape = (self.space.size,) + np.broadcast_shapes(self.batch_shape, c.shape)
        coef = np.array(np.broadcast_to(self.coef, shape))
        return coef, c

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.space, self.coef + other.coef)
        coef, c = self._with_constant(other)
        coef[0] += c
        return Jet(self.space, coef)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coef)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.space, self.coef - other.coef)
        return self + (-np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.space, self.space.mul_coef(self.coef, other.coef))
        c = np.asarray(other, dtype=float)
        return Jet(self.space, self.coef * c[None, ...])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        c = np.asarray(other, dtype=float)
        if np.any(c == 0):
            raise ZeroDivisionError("jet division by zero")
        return Jet(self.space, self.coef / c[None, ...])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)):
            p = int(p)
            if p < 0:
                return self.reciprocal() ** (-p)
            result = Jet.constant(np.ones(self.batch_shape), self.space)
            base = self
            while p:
                if p & 1:
                    result = result * base
                p >>= 1
                if p:
                    base = base * base
            return result
        p = float(p)
        if p.is_integer():
            return self ** int(p)
        a = self.value
        if np.any(a <= 0):
            raise ValueError("non-integer power of a jet with non-positive value")
        return self.compose(_power_derivs(a, p, self.order))

    # -- univariate composition --------------------------------------------
    def compose(self, derivs) -> "Jet":
        """Apply a univariate function given its derivatives at the value.

        ``derivs[k]`` is the k-th derivative of the outer function evaluated at
        ``self.value``; at least ``order + 1`` entries are required.
        """
        K = self.order
        delta = Jet(self.space, self.coef.copy())
        delta.coef[0] = 0.0
        result = Jet.constant(np.asarray(derivs[K]) / math.factorial(K), self.space)
        for k in range(K - 1, -1, -1):
            result = result * delta + np.asarray(derivs[k]) / math.factorial(k)
        return result

    def reciprocal(self) -> "Jet":
        a = self.value
        if np.any(a == 0):
            raise ZeroDivisionError("jet reciprocal of zero value")
        return self.compose(_power_derivs(a, -1.0, self.order))

    def sqrt(self) -> "Jet":
        a = self.value
        if np.any(a <= 0):
            raise ValueError("negative radicand: jet sqrt needs a positive value")
        return self.compose(_power_derivs(a, 0.5, self.order))

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self.compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        a = self.value
        if np.any(a <= 0):
            raise ValueError("jet log needs a positive value")
        derivs = [np.log(a)]
        for k in range(1, self.order + 1):
            derivs.append((-1) ** (k - 1) * math.factorial(k - 1) / a**k)
        return self.compose(derivs)

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [s, c, -s, -c]
        return self.compose([cycle[k % 4] for k in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [c, -s, -c, s]
        return self.compose([cycle[k % 4] for k in range(self.order + 1)])


def _power_derivs(a, p: float, order: int):
    derivs = []
    fac = 1.0
    for k in range(order + 1):
        derivs.append(fac * a ** (p - k))
        fac *= p - k
    return derivs


# Module-level functions that work on jets and on plain floats/arrays alike.

def sqrt(x):
    if isinstance(x, Jet):
        return x.sqrt()
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("negative radicand")
    return np.sqrt(x)


def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Jet) else np.log(x)


def sin(x):
    return x.sin() if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Jet) else np.cos(x)


def value_of(x):
    """Plain value of a jet or number."""
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def seed(values, order: int):
    """Independent jet variables, one per entry of ``values``.

    Each entry may be a scalar or an array (a batch of base points); the
    returned jets share one :class:`JetSpace`.
    """
    space = jet_space(len(values), order)
    return tuple(Jet.variable(v, k, space) for k, v in enumerate(values))
