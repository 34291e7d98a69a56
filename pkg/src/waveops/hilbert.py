"""L^2(mu) for an atomic measure: functions, kernels, operators, conjugations.

Operators are stored in orthonormalized coordinates: a function ``f`` is
represented by ``f_j * sqrt(w_j)``, so the adjoint is the conjugate
transpose and the Hilbert-Schmidt norm is the Frobenius norm.  Function
coordinates only appear at the boundary (``GridFunction.values``).
"""
from __future__ import annotations

from dataclasses import dataclass
from numbers import Number

import numpy as np

from waveops.measure import DiscreteMeasure, same_measure


def _check_same(a, b):
    if not same_measure(a.measure, b.measure):
        raise ValueError("objects live on different measures")


def _array(values, shape, what):
    a = np.array(values, dtype=np.complex128)
    if a.shape != shape:
        raise ValueError(f"{what} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Element of L^2(mu): one complex value per atom."""

    measure: DiscreteMeasure
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values",
                           _array(self.values, (self.measure.size,), "function"))

    @classmethod
    def constant(cls, mu, c=1.0):
        return cls(mu, np.full(mu.size, c, dtype=np.complex128))

    @classmethod
    def monomial(cls, mu, k: int):
        """``z**k`` with exactly reduced phases."""
        return cls(mu, mu.powers(int(k)))

    @classmethod
    def from_function(cls, mu, fn):
        return cls(mu, fn(mu.points))

    @classmethod
    def from_orth(cls, mu, v):
        return cls(mu, np.asarray(v) / mu.sqrt_weights)

    @property
    def orth(self) -> np.ndarray:
        return self.values * self.measure.sqrt_weights

    def conj(self) -> "GridFunction":
        return GridFunction(self.measure, np.conj(self.values))

    def norm(self) -> float:
        return float(np.linalg.norm(self.orth))

    def _lift(self, other):
        if isinstance(other, GridFunction):
            _check_same(self, other)
            return other.values
        if isinstance(other, Number):
            return other
        return NotImplemented

    def __add__(self, other):
        o = self._lift(other)
        return NotImplemented if o is NotImplemented else GridFunction(self.measure, self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return NotImplemented if o is NotImplemented else GridFunction(self.measure, self.values - o)

    def __mul__(self, other):
        o = self._lift(other)
        return NotImplemented if o is NotImplemented else GridFunction(self.measure, self.values * o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        return NotImplemented if o is NotImplemented else GridFunction(self.measure, self.values / o)

    def __neg__(self):
        return GridFunction(self.measure, -self.values)


@dataclass(frozen=True, eq=False)
class Kernel:
    """Kernel values ``values[i, j] = k(xi=x_j, z=x_i)``; columns integrate against mu."""

    measure: DiscreteMeasure
    values: np.ndarray

    def __post_init__(self):
        m = self.measure.size
        object.__setattr__(self, "values", _array(self.values, (m, m), "kernel"))

    @classmethod
    def from_function(cls, mu, fn):
        """Tabulate ``fn(xi, z)`` on atom pairs."""
        z = mu.points
        return cls(mu, np.broadcast_to(fn(z[None, :], z[:, None]), (mu.size, mu.size)))

    @classmethod
    def zeros(cls, mu):
        return cls(mu, np.zeros((mu.size, mu.size)))

    def swapped(self) -> "Kernel":
        """The kernel ``(xi, z) -> k(z, xi)``."""
        return Kernel(self.measure, self.values.T)

    def bordered(self, left: GridFunction, right: GridFunction) -> "Kernel":
        """``(xi, z) -> left(z) k(xi, z) right(xi)``."""
        _check_same(self, left)
        _check_same(self, right)
        return Kernel(self.measure, left.values[:, None] * self.values * right.values[None, :])

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def __add__(self, other):
        _check_same(self, other)
        return Kernel(self.measure, self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return Kernel(self.measure, self.values - other.values)

    def __mul__(self, c):
        return Kernel(self.measure, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return Kernel(self.measure, -self.values)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Linear map on L^2(mu) in orthonormalized coordinates."""

    measure: DiscreteMeasure
    entries: np.ndarray
    tag: str = ""

    def __post_init__(self):
        m = self.measure.size
        object.__setattr__(self, "entries", _array(self.entries, (m, m), "operator"))

    @classmethod
    def identity(cls, mu, tag="I"):
        return cls(mu, np.eye(mu.size), tag)

    @classmethod
    def zeros(cls, mu, tag="0"):
        return cls(mu, np.zeros((mu.size, mu.size)), tag)

    @property
    def H(self) -> "OperatorMatrix":
        return adjoint(self)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)

    def is_diagonal(self) -> bool:
        e = self.entries
        return not np.any(e[~np.eye(e.shape[0], dtype=bool)])

    def norm(self) -> float:
        """Operator (spectral) norm."""
        if self.is_diagonal():
            return float(np.abs(self.diagonal).max())
        return float(np.linalg.norm(self.entries, 2))

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    def to_kernel(self) -> Kernel:
        s = self.measure.sqrt_weights
        return Kernel(self.measure, self.entries / np.outer(s, s))

    def apply(self, f: GridFunction) -> GridFunction:
        _check_same(self, f)
        return GridFunction.from_orth(self.measure, self.entries @ f.orth)

    def with_tag(self, tag):
        return OperatorMatrix(self.measure, self.entries, tag)

    def __matmul__(self, other):
        if isinstance(other, GridFunction):
            return self.apply(other)
        if isinstance(other, OperatorMatrix):
            _check_same(self, other)
            return OperatorMatrix(self.measure, self.entries @ other.entries)
        return NotImplemented

    def __add__(self, other):
        _check_same(self, other)
        return OperatorMatrix(self.measure, self.entries + other.entries)

    def __sub__(self, other):
        _check_same(self, other)
        return OperatorMatrix(self.measure, self.entries - other.entries)

    def __mul__(self, c):
        if not isinstance(c, Number):
            return NotImplemented
        return OperatorMatrix(self.measure, self.entries * c, self.tag)

    __rmul__ = __mul__

    def __neg__(self):
        return OperatorMatrix(self.measure, -self.entries, self.tag)


@dataclass(frozen=True, eq=False)
class Conjugation:
    """The anti-linear map ``f -> conj(gamma) * conj(f)``; gamma must not vanish."""

    measure: DiscreteMeasure
    gamma: GridFunction

    def __post_init__(self):
        _check_same(self, self.gamma)
        if np.any(self.gamma.values == 0):
            raise ValueError("gamma must be nonvanishing")

    @classmethod
    def canonical(cls, mu):
        return cls(mu, GridFunction.constant(mu, 1.0))

    @classmethod
    def from_gamma(cls, gamma: GridFunction):
        return cls(gamma.measure, gamma)

    @property
    def unimodular(self) -> bool:
        return bool(np.allclose(np.abs(self.gamma.values), 1.0, rtol=0, atol=1e-12))

    def __call__(self, f: GridFunction) -> GridFunction:
        return conjugate(self, f)


def inner(f: GridFunction, g: GridFunction) -> complex:
    """``sum_j f_j conj(g_j) w_j``: linear in the first slot."""
    _check_same(f, g)
    return complex(np.sum(f.values * np.conj(g.values) * f.measure.weights))


def multiplication_unitary(mu: DiscreteMeasure) -> OperatorMatrix:
    """Multiplication by the independent variable z."""
    return OperatorMatrix(mu, np.diag(mu.points), "U")


def multiplication_by(phi: GridFunction) -> OperatorMatrix:
    return OperatorMatrix(phi.measure, np.diag(phi.values), "M")


def integral_operator(k: Kernel) -> OperatorMatrix:
    """``(Kf)(z) = int k(xi, z) f(xi) dmu(xi)``."""
    s = k.measure.sqrt_weights
    return OperatorMatrix(k.measure, k.values * np.outer(s, s), "K")


def rank_one_kernel(u: GridFunction, v: GridFunction) -> Kernel:
    """Kernel ``u(xi) v(z)`` of the operator ``f -> (f, conj(u)) v``."""
    _check_same(u, v)
    return Kernel(u.measure, np.outer(v.values, u.values))


def hs_norm(k: Kernel) -> float:
    w = k.measure.weights
    return float(np.sqrt(np.sum(np.abs(k.values) ** 2 * np.outer(w, w))))


def adjoint(T: OperatorMatrix) -> OperatorMatrix:
    return OperatorMatrix(T.measure, T.entries.conj().T, T.tag + "*" if T.tag else "")


def conjugate(C: Conjugation, f: GridFunction) -> GridFunction:
    _check_same(C, f)
    return GridFunction(f.measure, np.conj(C.gamma.values) * np.conj(f.values))


def c_transform(C: Conjugation, T: OperatorMatrix) -> OperatorMatrix:
    """The operator ``h -> C T* C h``.

    In orthonormalized coordinates this is ``diag(conj(gamma)) T^t diag(gamma)``.
    """
    _check_same(C, T)
    if not C.unimodular:
        raise ValueError("c_transform needs a unimodular gamma (C must be an involution)")
    g = C.gamma.values
    return OperatorMatrix(T.measure, np.conj(g)[:, None] * T.entries.T * g[None, :])
