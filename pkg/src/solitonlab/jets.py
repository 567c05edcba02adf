"""Truncated multivariate Taylor arithmetic ("jets").

A jet stores the Taylor coefficients c_alpha = d^alpha f / alpha! of a scalar
quantity for all multi-indices alpha with |alpha| <= order, in up to four
variables.  Arithmetic on jets (sums, products, quotients, compositions with
the elementary functions) propagates derivatives exactly, so downstream code
never falls back on finite differencing.

The standard order is 3: scalar curvature gradients and tensor divergences
consume third derivatives of the metric and nothing in the check suite needs
a fourth derivative of it.  Order 4 is supported as well because the
divergence of a twice Lie-dragged metric along a gradient field reaches the
fourth derivative of the potential; only scalar potentials are ever
evaluated at that order.

Coefficients live in a dense array whose last axis enumerates multi-indices
in a fixed degree-major order (see `multi_indices`).  Leading axes are batch
axes, so a single jet object can carry the expansion of a field at every
grid node at once.
"""

from __future__ import annotations

import math
from itertools import combinations_with_replacement

import numpy as np

MAX_DIM = 4
DEFAULT_ORDER = 3

__all__ = [
    "Jet",
    "JetDomainError",
    "seed",
    "constant",
    "apply_unary",
    "multi_indices",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "powc",
]


class JetDomainError(ValueError):
    """An elementary function was evaluated outside its domain.

    `index` is the flat batch index of the first offending entry (None for
    unbatched jets) and `value` the offending input value.
    """

    def __init__(self, message, index=None, value=None):
        super().__init__(message)
        self.index = index
        self.value = value


def multi_indices(dim, order=DEFAULT_ORDER):
    """All exponent tuples with |alpha| <= order, degree-major then lexicographic."""
    out = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(dim), deg):
            alpha = [0] * dim
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return out


class _Tables:
    """Precomputed index bookkeeping for one (dim, order) pair."""

    def __init__(self, dim, order):
        self.dim = dim
        self.order = order
        self.alphas = multi_indices(dim, order)
        self.size = len(self.alphas)
        self.index = {a: k for k, a in enumerate(self.alphas)}
        self.degrees = np.array([sum(a) for a in self.alphas])

        # Triples (i, j, k) with alpha_i + alpha_j = alpha_k, sorted by k so a
        # truncated product is one gather-multiply plus a segmented reduction.
        triples = []
        for i, ai in enumerate(self.alphas):
            for j, aj in enumerate(self.alphas):
                if sum(ai) + sum(aj) <= order:
                    k = self.index[tuple(x + y for x, y in zip(ai, aj))]
                    triples.append((k, i, j))
        triples.sort()
        trip = np.array(triples)
        self.mul_k = trip[:, 0]
        self.mul_i = trip[:, 1]
        self.mul_j = trip[:, 2]
        self.mul_starts = np.searchsorted(self.mul_k, np.arange(self.size))

        def unit(i):
            e = [0] * dim
            e[i] = 1
            return tuple(e)

        def fact(alpha):
            f = 1
            for a in alpha:
                f *= math.factorial(a)
            return f

        self.grad_pos = np.array([self.index[unit(i)] for i in range(dim)])

        self.hess_pos = np.empty((dim, dim), dtype=int)
        self.hess_fac = np.empty((dim, dim))
        for i in range(dim):
            for j in range(dim):
                alpha = tuple(unit(i)[t] + unit(j)[t] for t in range(dim))
                self.hess_pos[i, j] = self.index[alpha]
                self.hess_fac[i, j] = fact(alpha)

        self.third_pos = np.empty((dim, dim, dim), dtype=int)
        self.third_fac = np.empty((dim, dim, dim))
        for i in range(dim):
            for j in range(dim):
                for k in range(dim):
                    alpha = tuple(
                        unit(i)[t] + unit(j)[t] + unit(k)[t] for t in range(dim)
                    )
                    self.third_pos[i, j, k] = self.index[alpha]
                    self.third_fac[i, j, k] = fact(alpha)

        if order >= 4:
            self.fourth_pos = np.empty((dim,) * 4, dtype=int)
            self.fourth_fac = np.empty((dim,) * 4)
            for i in range(dim):
                for j in range(dim):
                    for k in range(dim):
                        for l in range(dim):
                            alpha = tuple(
                                unit(i)[t] + unit(j)[t] + unit(k)[t] + unit(l)[t]
                                for t in range(dim)
                            )
                            self.fourth_pos[i, j, k, l] = self.index[alpha]
                            self.fourth_fac[i, j, k, l] = fact(alpha)


_TABLES: dict[tuple[int, int], _Tables] = {}


def _tables(dim, order):
    if not 1 <= dim <= MAX_DIM:
        raise ValueError(f"jet dimension must be in 1..{MAX_DIM}, got {dim}")
    if order not in (3, 4):
        raise ValueError(f"jet order must be 3 or 4, got {order}")
    key = (dim, order)
    if key not in _TABLES:
        _TABLES[key] = _Tables(dim, order)
    return _TABLES[key]


class Jet:
    """Dense truncated Taylor expansion; arithmetic closes over the truncation.

    `coeffs` has shape (..., size) with the last axis indexed by
    `multi_indices(dim, order)`.  Batch axes broadcast through every
    operation.
    """

    __slots__ = ("dim", "order", "coeffs")

    def __init__(self, dim, coeffs, order=DEFAULT_ORDER):
        tab = _tables(dim, order)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != tab.size:
            raise ValueError(
                f"expected {tab.size} coefficients for dim {dim} order {order}, "
                f"got {coeffs.shape[-1]}"
            )
        self.dim = dim
        self.order = order
        self.coeffs = coeffs

    # -- constructors ------------------------------------------------------

    @property
    def _tab(self):
        return _tables(self.dim, self.order)

    @property
    def value(self):
        return self.coeffs[..., 0]

    def _new(self, coeffs):
        return Jet(self.dim, coeffs, self.order)

    def _zeros_like(self):
        return np.zeros_like(self.coeffs)

    # -- derivative extraction ---------------------------------------------

    def gradient(self):
        """d_i f, shape (..., dim)."""
        return self.coeffs[..., self._tab.grad_pos]

    def hessian(self):
        """d_i d_j f, shape (..., dim, dim), symmetric."""
        tab = self._tab
        return self.coeffs[..., tab.hess_pos] * tab.hess_fac

    def third(self):
        """d_i d_j d_k f, shape (..., dim, dim, dim), fully symmetric."""
        tab = self._tab
        return self.coeffs[..., tab.third_pos] * tab.third_fac

    def fourth(self):
        tab = self._tab
        if tab.order < 4:
            raise ValueError("fourth derivatives require an order-4 jet")
        return self.coeffs[..., tab.fourth_pos] * tab.fourth_fac

    def partial(self, alpha):
        """d^alpha f for one multi-index, as an array over the batch axes."""
        alpha = tuple(int(a) for a in alpha)
        tab = self._tab
        if alpha not in tab.index:
            raise KeyError(f"multi-index {alpha} out of range for order {tab.order}")
        fac = 1.0
        for a in alpha:
            fac *= math.factorial(a)
        return self.coeffs[..., tab.index[alpha]] * fac

    # -- ring operations -----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim or other.order != self.order:
                raise ValueError("jet dim/order mismatch")
            return other
        if np.isscalar(other) or isinstance(other, np.ndarray):
            return constant(self.dim, other, self.order)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._new(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._new(self.coeffs - other.coeffs)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other.__sub__(self)

    def __neg__(self):
        return self._new(-self.coeffs)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        tab = self._tab
        prod = (
            np.take(self.coeffs, tab.mul_i, axis=-1)
            * np.take(other.coeffs, tab.mul_j, axis=-1)
        )
        return self._new(np.add.reduceat(prod, tab.mul_starts, axis=-1))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * _reciprocal(other)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * _reciprocal(self)

    def __pow__(self, expo):
        return powc(self, expo)

    def compose(self, derivs):
        """Faa di Bruno for phi(f): derivs = [phi(v), phi'(v), ...] at v = value.

        Exact at the truncation order because the zero-constant part of the
        jet is nilpotent: its k-th power has no terms below degree k.
        """
        tab = self._tab
        if len(derivs) != self.order + 1:
            raise ValueError("need order+1 derivative values for composition")
        ubar = self.coeffs.copy()
        ubar[..., 0] = 0.0
        ubar = self._new(ubar)
        out = self._zeros_like()
        out[..., 0] = derivs[0]
        power = ubar
        scale = 1.0
        for k in range(1, self.order + 1):
            scale /= k
            out = out + derivs[k][..., None] * scale * power.coeffs
            if k < self.order:
                power = power * ubar
        return self._new(out)


def seed(dim, x, i, order=DEFAULT_ORDER):
    """Jet of the coordinate function x_i at the point(s) x.

    x has shape (..., dim); the result carries the same batch axes.
    """
    tab = _tables(dim, order)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"point has {x.shape[-1]} components, chart has {dim}")
    if not 0 <= i < dim:
        raise ValueError(f"coordinate index {i} out of range for dim {dim}")
    coeffs = np.zeros(x.shape[:-1] + (tab.size,))
    coeffs[..., 0] = x[..., i]
    coeffs[..., tab.grad_pos[i]] = 1.0
    return Jet(dim, coeffs, order)


def constant(dim, value, order=DEFAULT_ORDER):
    tab = _tables(dim, order)
    value = np.asarray(value, dtype=float)
    coeffs = np.zeros(value.shape + (tab.size,))
    coeffs[..., 0] = value
    return Jet(dim, coeffs, order)


def _first_bad(mask):
    idx = np.flatnonzero(np.asarray(mask).ravel())
    return int(idx[0]) if idx.size else None


def _reciprocal(a):
    v = a.value
    if np.any(v == 0.0):
        i = _first_bad(v == 0.0)
        raise JetDomainError("division by a jet with zero value", index=i, value=0.0)
    inv = 1.0 / v
    derivs = [inv]
    for k in range(1, a.order + 1):
        derivs.append(derivs[-1] * (-k) * inv)
    return a.compose(derivs)


def sin(a):
    v = a.value
    table = [np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)]
    return a.compose([table[k % 4] for k in range(a.order + 1)])


def cos(a):
    v = a.value
    table = [np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)]
    return a.compose([table[k % 4] for k in range(a.order + 1)])


def exp(a):
    e = np.exp(a.value)
    return a.compose([e] * (a.order + 1))


def log(a):
    v = a.value
    if np.any(v <= 0.0):
        i = _first_bad(v <= 0.0)
        bad = float(np.asarray(v).ravel()[i]) if i is not None else float(v)
        raise JetDomainError("log requires a positive value", index=i, value=bad)
    inv = 1.0 / v
    derivs = [np.log(v), inv]
    for k in range(2, a.order + 1):
        derivs.append(derivs[-1] * (-(k - 1)) * inv)
    return a.compose(derivs)


def sqrt(a):
    v = a.value
    if np.any(v < 0.0):
        i = _first_bad(v < 0.0)
        bad = float(np.asarray(v).ravel()[i]) if i is not None else float(v)
        raise JetDomainError("sqrt requires a nonnegative value", index=i, value=bad)
    nonconst = np.any(a.coeffs[..., 1:] != 0.0, axis=-1)
    if np.any((v == 0.0) & nonconst):
        i = _first_bad((v == 0.0) & nonconst)
        raise JetDomainError(
            "sqrt of a vanishing non-constant jet has no Taylor expansion",
            index=i,
            value=0.0,
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.sqrt(v)
        derivs = [root]
        coeff = 0.5
        for k in range(1, a.order + 1):
            derivs.append(np.where(v > 0.0, coeff * root / v**k, 0.0))
            coeff *= 0.5 - k
    return a.compose(derivs)


def powc(a, expo):
    """a**c for a constant exponent.

    Integer exponents go through repeated multiplication and are valid
    wherever the base is (negative integers need a nonzero value).  Other
    exponents use exp(c log a) and need a positive value.
    """
    if isinstance(expo, Jet):
        raise TypeError("exponent must be a constant, not a jet")
    c = float(expo)
    if c == int(c):
        n = int(c)
        if n < 0:
            return _reciprocal(powc(a, -n))
        out = constant(a.dim, np.ones(a.value.shape), a.order)
        base = a
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out
    return exp(log(a) * c)


_UNARY = {
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "neg": lambda a: -a,
}


def apply_unary(op, a, exponent=None):
    """Dispatch an elementary operation by tag; `pow` takes the constant exponent."""
    if op == "pow":
        if exponent is None:
            raise ValueError("pow requires an exponent")
        return powc(a, exponent)
    if op not in _UNARY:
        raise ValueError(f"unknown unary operation {op!r}")
    return _UNARY[op](a)
