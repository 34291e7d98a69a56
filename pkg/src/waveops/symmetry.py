"""Kernel symmetry conditions and the gauge function gamma.

A kernel ``k`` satisfies the *antisymmetric* condition with gauge ``gamma`` if

    gamma(z) k(xi, z) = -gamma(xi) k(z, xi)

for all atom pairs, and the *symmetric* condition with ``+`` instead of ``-``.
In matrix form (``k[i, j] = k(x_j, x_i)``) this reads
``gamma_i k[i, j] = -/+ gamma_j k[j, i]``.
"""
from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from waveops.hilbert import GridFunction, Kernel, _check_same
from waveops.measure import DiscreteMeasure

ANTISYMMETRIC = "antisymmetric"
SYMMETRIC = "symmetric"
SIGNS = (ANTISYMMETRIC, SYMMETRIC)

DEFAULT_TOL = 1e-10
DEFAULT_ZERO_TOL = 1e-12
COND_LIMIT = 1e8


class IllConditionedWarning(UserWarning):
    """Nearly coincident atoms make the identification operator huge."""


def _sign_factor(sign):
    if sign not in SIGNS:
        raise ValueError(f"sign must be one of {SIGNS}, got {sign!r}")
    # residual is gamma_i k_ij + s * gamma_j k_ji
    return 1.0 if sign == ANTISYMMETRIC else -1.0


@dataclass(frozen=True, eq=False)
class SymmetryReport:
    sign: str
    gamma: Optional[GridFunction]
    residual: float
    witness: Optional[dict] = None
    zero_tol: float = DEFAULT_ZERO_TOL
    tol: float = DEFAULT_TOL
    cycle_checks: int = field(default=0, repr=False)

    @property
    def passed(self) -> bool:
        return self.witness is None and self.residual <= self.tol

    def to_dict(self) -> dict:
        g = None
        if self.gamma is not None:
            g = [[float(v.real), float(v.imag)] for v in self.gamma.values]
        return {
            "sign": self.sign,
            "residual": float(self.residual),
            "gamma": g,
            "witness": self.witness,
            "zero_tol": self.zero_tol,
            "tol": self.tol,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _residual_matrix(kv, g, s):
    return np.abs(g[:, None] * kv + s * g[None, :] * kv.T)


def check_kernel_condition(k: Kernel, gamma: GridFunction, sign: str,
                           tol: float = DEFAULT_TOL) -> SymmetryReport:
    """Measure how far ``k`` is from the gauge condition with the given ``gamma``.

    The residual is ``max |gamma_i k_ij +/- gamma_j k_ji| / max(1, max |k|)``.
    On failure the report carries the worst pair as witness and no gamma.
    """
    s = _sign_factor(sign)
    _check_same(k, gamma)
    g = gamma.values
    if np.any(g == 0):
        raise ValueError("gamma must be nonvanishing")
    kv = k.values
    res = _residual_matrix(kv, g, s)
    scale = max(1.0, float(np.abs(kv).max()))
    r = float(res.max()) / scale
    if r <= tol:
        return SymmetryReport(sign, gamma, r, None, tol=tol)
    i, j = np.unravel_index(int(np.argmax(res)), res.shape)
    return SymmetryReport(sign, None, r, {"kind": "pair", "indices": [int(i), int(j)]},
                          tol=tol)


def _tree_path(parent, depth, a, b):
    """Vertices on the forest path from ``a`` to ``b`` (same component)."""
    left, right = [a], [b]
    while depth[a] > depth[b]:
        a = parent[a]
        left.append(a)
    while depth[b] > depth[a]:
        b = parent[b]
        right.append(b)
    while a != b:
        a, b = parent[a], parent[b]
        left.append(a)
        right.append(b)
    right.pop()
    return left + right[::-1]


def find_gamma(k: Kernel, sign: str, zero_tol: float = DEFAULT_ZERO_TOL,
               tol: float = DEFAULT_TOL) -> SymmetryReport:
    """Search for a gauge making ``k`` satisfy the condition of the given sign.

    Ratios ``gamma_i / gamma_j`` are forced along every nonzero entry, so gamma
    is propagated over a BFS forest (roots in atom index order, root value 1)
    and every remaining edge is checked.  Atoms with empty rows and columns
    get gamma = 1.
    """
    s = _sign_factor(sign)
    mu = k.measure
    kv = k.values
    m = mu.size
    scale = float(np.abs(kv).max())
    if scale == 0.0:
        return SymmetryReport(sign, GridFunction.constant(mu, 1.0), 0.0, None, zero_tol, tol)
    nz = np.abs(kv) > zero_tol * scale
    asym = nz != nz.T
    if asym.any():
        i, j = np.argwhere(asym)[0]
        return SymmetryReport(sign, None, float("inf"),
                              {"kind": "zero_pattern", "indices": [int(i), int(j)]},
                              zero_tol, tol)
    if s > 0:
        bad = np.flatnonzero(np.diag(nz))
        if bad.size:
            # a self-loop: gamma_i k_ii = -gamma_i k_ii forces k_ii = 0
            return SymmetryReport(sign, None, float("inf"),
                                  {"kind": "cycle", "indices": [int(bad[0])]}, zero_tol, tol)
    adj = nz.copy()
    np.fill_diagonal(adj, False)

    g = np.ones(m, dtype=np.complex128)
    parent = np.full(m, -1)
    depth = np.zeros(m, dtype=int)
    seen = np.zeros(m, dtype=bool)
    for root in range(m):
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            j = queue.popleft()
            for i in np.flatnonzero(adj[:, j] & ~seen):
                # gamma_i k_ij = -s gamma_j k_ji
                g[i] = -s * g[j] * kv[j, i] / kv[i, j]
                parent[i] = j
                depth[i] = depth[j] + 1
                seen[i] = True
                queue.append(i)

    lhs = np.abs(g[:, None] * kv)
    res = np.abs(g[:, None] * kv + s * g[None, :] * kv.T)
    edge_scale = np.maximum(lhs, lhs.T)
    broken = adj & (res > tol * edge_scale)
    if broken.any():
        i, j = np.argwhere(broken)[0]
        cycle = _tree_path(parent, depth, int(i), int(j))
        return SymmetryReport(sign, None, float(res[i, j] / edge_scale[i, j]),
                              {"kind": "cycle", "indices": [int(c) for c in cycle]},
                              zero_tol, tol, int(adj.sum()) // 2)
    gamma = GridFunction(mu, g)
    rep = check_kernel_condition(k, gamma, sign, tol)
    return SymmetryReport(sign, gamma, rep.residual, None, zero_tol, tol, int(adj.sum()) // 2)


def identification_cond(k: Kernel) -> float:
    """``max |k| / min_{i != j} |lambda_i - lambda_j|``."""
    return float(np.abs(k.values).max()) / k.measure.min_gap_phase


def solve_identification(k: Kernel, tol: float = DEFAULT_TOL) -> Kernel:
    """Kernel ``x`` of an operator X with ``XU - UX`` equal to the integral operator of ``k``.

    The commutator of an integral operator with kernel ``x`` has kernel
    ``x(xi, z) (xi - z)``, so ``x_ij = k_ij / (lambda_j - lambda_i)`` off the
    diagonal; the diagonal of ``x`` is set to 0 (any diagonal commutes with U).
    """
    mu = k.measure
    kv = k.values
    scale = float(np.abs(kv).max())
    diag = np.abs(np.diag(kv))
    if scale > 0 and diag.max() > tol * scale:
        i = int(np.argmax(diag))
        raise ValueError(
            f"commutator kernel must vanish on the diagonal; |k[{i},{i}]| = {diag[i]:.3e}")
    cond = identification_cond(k)
    if cond > COND_LIMIT:
        warnings.warn(f"identification condition number {cond:.3e} exceeds {COND_LIMIT:.0e}",
                      IllConditionedWarning, stacklevel=2)
    lam = mu.points
    den = lam[None, :] - lam[:, None]
    np.fill_diagonal(den, 1.0)
    x = kv / den
    np.fill_diagonal(x, 0.0)
    return Kernel(mu, x)


def make_rank_two(u1: GridFunction, v1: GridFunction, u2: GridFunction,
                  v2: GridFunction, tol: float = 1e-12):
    """Kernel ``u1(xi) v1(z) - u2(xi) v2(z)`` and its gauge ``gamma = u1 / v2``.

    Requires ``u1 v1 == u2 v2`` pointwise (the commutator solvability
    condition); then the kernel satisfies the antisymmetric condition.
    """
    for f in (v1, u2, v2):
        _check_same(u1, f)
    defect = np.abs(u1.values * v1.values - u2.values * v2.values)
    scale = max(1.0, float(np.abs(u1.values * v1.values).max()))
    if defect.max() > tol * scale:
        raise ValueError(f"u1 v1 = u2 v2 violated: max defect {defect.max():.3e}")
    if np.any(v1.values == 0) or np.any(v2.values == 0):
        raise ValueError("v1 and v2 must be nonvanishing")
    kv = np.outer(v1.values, u1.values) - np.outer(v2.values, u2.values)
    return Kernel(u1.measure, kv), u1 / v2


def counterexample_kernel(mu: DiscreteMeasure) -> Kernel:
    """``k(xi, z) = 1 - Re(conj(xi) z)``: symmetric, rank three, no gauge for the antisymmetric condition."""
    return Kernel.from_function(mu, lambda xi, z: 1.0 - (np.conj(xi) * z).real)


def counterexample_identification(mu: DiscreteMeasure) -> Kernel:
    """Kernel ``(conj(xi) - conj(z)) / 2`` of ``X = ((., z) 1 - (., 1) conj(z)) / 2``."""
    return Kernel.from_function(mu, lambda xi, z: 0.5 * (np.conj(xi) - np.conj(z)))


def split_counterexample(mu: DiscreteMeasure):
    """Split the counterexample kernel into two rank-two commutator kernels.

    Returns ``(k1, k2, gamma1, gamma2)`` with ``k1 + k2 = 1 - Re(conj(xi) z)``,
    ``k1 = (1 - conj(xi) z) / 2`` and ``k2 = (1 - xi conj(z)) / 2``, each the
    commutator of one rank-one piece of X.
    """
    z = GridFunction.monomial(mu, 1)
    half = GridFunction.constant(mu, 0.5)
    one = GridFunction.constant(mu, 1.0)
    k1, g1 = make_rank_two(half, one, 0.5 * z.conj(), z)
    k2, g2 = make_rank_two(half, one, 0.5 * z, z.conj())
    return k1, k2, g1, g2


def random_trig_poly(mu: DiscreteMeasure, rng, degree: int,
                     nonvanishing: bool = False) -> GridFunction:
    """Random trigonometric polynomial ``sum_{|j|<=degree} c_j z^j``.

    With ``nonvanishing`` the constant term is 1 and the others have total
    modulus 0.6, so ``|p| >= 0.4`` everywhere.
    """
    c = rng.standard_normal(2 * degree + 1) + 1j * rng.standard_normal(2 * degree + 1)
    if nonvanishing:
        rest = np.abs(np.delete(c, degree)).sum()
        c *= 0.6 / rest if rest > 0 else 0.0
        c[degree] = 1.0
    vals = sum(c[j] * mu.powers(j - degree) for j in range(2 * degree + 1))
    return GridFunction(mu, vals)


def random_rank_two(mu: DiscreteMeasure, rng, degree: int = 3):
    """Smooth rank-two commutator kernel with its gauge.

    Uses ``u1 = a c``, ``v1 = b d``, ``u2 = a d``, ``v2 = b c`` for random
    trigonometric polynomials (b, c, d nonvanishing), so ``u1 v1 = u2 v2``
    holds identically and the kernel vanishes smoothly on the diagonal; the
    identification operator then stays bounded as the measure is refined.
    """
    a = random_trig_poly(mu, rng, degree)
    b, c, d = (random_trig_poly(mu, rng, degree, nonvanishing=True) for _ in range(3))
    return make_rank_two(a * c, b * d, a * d, b * c)


def random_kernel(mu: DiscreteMeasure, symmetry: str, rng,
                  gamma: Optional[GridFunction] = None) -> Kernel:
    """Complex Gaussian kernel projected onto a symmetry class, zero diagonal.

    ``symmetry`` is ``"antisymmetric"``, ``"symmetric"`` or ``"none"``.  With a
    gauge ``gamma`` the result satisfies ``gamma_i k_ij = -/+ gamma_j k_ji``.
    """
    m = mu.size
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    if symmetry == ANTISYMMETRIC:
        a = 0.5 * (a - a.T)
    elif symmetry == SYMMETRIC:
        a = 0.5 * (a + a.T)
    elif symmetry != "none":
        raise ValueError(f"unknown symmetry class {symmetry!r}")
    np.fill_diagonal(a, 0.0)
    if gamma is not None:
        _check_same(gamma, GridFunction.constant(mu))
        a = a / gamma.values[:, None]
    return Kernel(mu, a)
