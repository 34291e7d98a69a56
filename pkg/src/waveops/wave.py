"""Propagated sequences ``U^n X U^-n``, Cesaro means and their exact identities.

Throughout, ``U`` is a diagonal unitary (normally ``multiplication_unitary(mu)``),
``P(n) = U^n X U^-n`` and ``K = XU - UX``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from waveops.hilbert import (Conjugation, GridFunction, OperatorMatrix, _check_same,
                             c_transform, inner, multiplication_unitary)


class PreconditionError(ValueError):
    """A symmetry precondition failed; ``defect`` is the measured violation."""

    def __init__(self, message, defect):
        super().__init__(message)
        self.defect = defect


# -- diagonal unitaries -----------------------------------------------------


def _diag_unitary(U: OperatorMatrix) -> np.ndarray:
    if not U.is_diagonal():
        raise ValueError("U must be a diagonal unitary")
    lam = U.diagonal
    if not np.allclose(np.abs(lam), 1.0, rtol=0, atol=1e-12):
        raise ValueError("U must be unitary (unimodular diagonal)")
    return lam


def _turns(U: OperatorMatrix) -> tuple[np.ndarray, Optional[object]]:
    """Angles of U in turns; the measure itself when U is its multiplication unitary."""
    lam = _diag_unitary(U)
    mu = U.measure
    if np.array_equal(lam, mu.points):
        return mu.thetas, mu
    return np.mod(np.angle(lam) / (2 * np.pi), 1.0), None


def power_table(U: OperatorMatrix, exps) -> np.ndarray:
    """Row ``a`` holds the diagonal of ``U ** exps[a]``."""
    exps = np.atleast_1d(np.asarray(exps, dtype=np.int64))
    th, mu = _turns(U)
    if mu is not None:
        return np.exp(2j * np.pi * mu.frac_turns(exps))
    x = exps.astype(np.float64)[:, None] * th[None, :]
    return np.exp(2j * np.pi * (x - np.floor(x)))


def _pow(U, n):
    return power_table(U, [n])[0]


def commutator(X: OperatorMatrix, U: Optional[OperatorMatrix] = None) -> OperatorMatrix:
    """``K = XU - UX``."""
    if U is None:
        U = multiplication_unitary(X.measure)
    return (X @ U - U @ X).with_tag("K")


def propagate(U: OperatorMatrix, T: OperatorMatrix, n: int) -> OperatorMatrix:
    """``U^n T U^-n``; entries ``T_ij lambda_i^n conj(lambda_j)^n``."""
    _check_same(U, T)
    p = _pow(U, int(n))
    return OperatorMatrix(T.measure, p[:, None] * T.entries * np.conj(p)[None, :], T.tag)


def shift(U: OperatorMatrix, f: GridFunction, n: int) -> GridFunction:
    """``U^n f``."""
    return GridFunction(f.measure, _pow(U, int(n)) * f.values)


# -- Cesaro means -------------------------------------------------------------


def cesaro_means(seq, Ns: Sequence[int]) -> np.ndarray:
    """Means of the first N terms of ``seq`` for each N, via one prefix sum."""
    x = np.asarray(seq)
    Ns = np.asarray(Ns, dtype=np.int64)
    if Ns.size == 0:
        return np.zeros(0, dtype=x.dtype)
    if Ns.min() < 1:
        raise ValueError("N must be >= 1")
    if Ns.max() > x.size:
        raise ValueError(f"sequence has {x.size} terms, need {Ns.max()}")
    prefix = np.cumsum(x[: int(Ns.max())])
    return prefix[Ns - 1] / Ns


def frac_multiple(t: float, ns) -> np.ndarray:
    """``n * t mod 1`` for integers ``|n| < 2**30`` with a single final rounding.

    ``t`` is split as ``a + b`` with ``a = k / 2**30``; ``n * a mod 1`` is then
    reduced exactly in integers and ``n * b`` is below ``2**-30 * |n|``.
    """
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size and np.abs(ns).max() >= 1 << 30:
        raise ValueError("frac_multiple needs |n| < 2**30")
    t = float(t) % 1.0
    k = math.floor(t * (1 << 30))
    b = t - k / (1 << 30)
    head = np.mod(ns * k, 1 << 30).astype(np.float64) / (1 << 30)
    return np.mod(head + ns * b, 1.0)


def cesaro(seq, N: int):
    """``(1/N) sum_{n=0}^{N-1} seq[n]``."""
    return cesaro_means(seq, [N])[0]


def geometric_cesaro(omega_turns, N: int, omega_N_turns=None) -> np.ndarray:
    """``(1/N) sum_{n<N} omega^n`` for ``omega = exp(2 pi i t)``, in Dirichlet form.

    ``omega_N_turns`` may supply the exactly reduced phase of ``omega^N``.
    """
    t = np.asarray(omega_turns, dtype=np.float64)
    a = N * t if omega_N_turns is None else np.asarray(omega_N_turns, dtype=np.float64)
    t = t - np.round(t)
    a = a - np.round(a)
    # below this angle the mean differs from 1 by at most pi N |t|
    one = np.abs(t) < 1e-250
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.sin(np.pi * a) / (N * np.sin(np.pi * t)) * np.exp(1j * np.pi * (a - t))
    return np.where(one, 1.0 + 0j, g)


def cesaro_propagated(U: OperatorMatrix, T: OperatorMatrix, N: int, sign: int = 1) -> OperatorMatrix:
    """``(1/N) sum_{n<N} U^(sign n) T U^-(sign n)`` in closed form."""
    _check_same(U, T)
    th, mu = _turns(U)
    fN = mu.frac_turns([N])[0] if mu is not None else np.mod(N * th, 1.0)
    d = th[:, None] - th[None, :]
    dN = fN[:, None] - fN[None, :]
    g = geometric_cesaro(d, N, dN)
    if sign < 0:
        g = np.conj(g)
    return OperatorMatrix(T.measure, T.entries * g, T.tag)


# -- pairings and eta ---------------------------------------------------------


def difference_pairing(X, U, h1: GridFunction, h2: GridFunction, n: int) -> complex:
    """``((U^n X U^-n - U^-n X U^n) h1, h2)``."""
    T = propagate(U, X, n) - propagate(U, X, -n)
    return inner(T @ h1, h2)


def sum_pairing(X, U, h1: GridFunction, h2: GridFunction, n: int) -> complex:
    """``((U^n X U^-n + U^-n X U^n) h1, h2)``."""
    T = propagate(U, X, n) + propagate(U, X, -n)
    return inner(T @ h1, h2)


def formal_sum(term: Callable[[int], complex], p: int, q: int) -> complex:
    """``sum_{m=p}^{q} term(m)``, with ``sum_{m=p}^{q} = -sum_{m=q+1}^{p-1}`` when ``p > q``."""
    if q >= p:
        return sum((term(m) for m in range(p, q + 1)), 0j)
    return -sum((term(m) for m in range(q + 1, p)), 0j)


def eta(K, U, e: GridFunction, ebar: GridFunction, k: int, l: int, m: int) -> complex:
    """``eta_m = (K U^(k-m-1) e, U^(l-m) ebar)``."""
    return inner(K @ shift(U, e, k - m - 1), shift(U, ebar, l - m))


@dataclass(frozen=True)
class EtaSequence:
    """``eta_m`` for ``lo <= m <= lo + len(values) - 1`` with prefix sums."""

    k: int
    l: int
    lo: int
    values: np.ndarray

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    @property
    def prefix(self) -> np.ndarray:
        return np.concatenate([[0j], np.cumsum(self.values)])

    def __getitem__(self, m: int) -> complex:
        if not self.lo <= m <= self.hi:
            raise IndexError(f"eta_{m} outside [{self.lo}, {self.hi}]")
        return complex(self.values[m - self.lo])

    def formal_sum(self, p: int, q: int) -> complex:
        """``sum_{m=p}^{q} eta_m`` under the formal-sum convention."""
        lo_idx, hi_idx = min(p, q + 1), max(p, q + 1)
        if lo_idx < self.lo or hi_idx - 1 > self.hi:
            raise IndexError(f"formal sum [{p}, {q}] needs eta outside [{self.lo}, {self.hi}]")
        pre = self.prefix
        return complex(pre[q + 1 - self.lo] - pre[p - self.lo])


def eta_range(K, U, e: GridFunction, ebar: GridFunction, k: int, l: int,
              lo: int, hi: int) -> EtaSequence:
    ms = np.arange(lo, hi + 1)
    A = power_table(U, k - ms - 1) * e.orth[None, :]
    B = power_table(U, l - ms) * ebar.orth[None, :]
    vals = np.einsum("ai,ai->a", A @ K.entries.T, np.conj(B))
    return EtaSequence(int(k), int(l), int(lo), vals)


def eta_family(K, U, e: GridFunction, ebar: GridFunction, ks, ls, lo: int,
               hi: int) -> dict:
    """``eta_range`` for every ``(k, l)`` in ``ks x ls`` from one table of pairings.

    ``eta_m`` only depends on ``p = k - m - 1`` and ``q = l - m``, so all
    sequences are read off ``H[q, p] = (K U^p e, U^q ebar)``.
    """
    ks, ls = [int(k) for k in ks], [int(l) for l in ls]
    p0, p1 = min(ks) - hi - 1, max(ks) - lo - 1
    q0, q1 = min(ls) - hi, max(ls) - lo
    A = power_table(U, np.arange(p0, p1 + 1)) * e.orth[None, :]
    B = power_table(U, np.arange(q0, q1 + 1)) * ebar.orth[None, :]
    H = np.conj(B) @ (K.entries @ A.T)
    ms = np.arange(lo, hi + 1)
    return {(k, l): EtaSequence(k, l, int(lo), H[l - ms - q0, k - ms - 1 - p0].copy())
            for k in ks for l in ls}


def eta_antisymmetry_defect(seq: EtaSequence) -> float:
    """``max |eta_p + eta_q|`` over ``p + q = k + l - 1`` inside the range."""
    return _reflection_defect(seq, +1)


def eta_symmetry_defect(seq: EtaSequence) -> float:
    """``max |eta_p - eta_q|`` over ``p + q = k + l - 1`` inside the range."""
    return _reflection_defect(seq, -1)


def _reflection_defect(seq, s):
    c = seq.k + seq.l - 1
    ms = np.arange(seq.lo, seq.hi + 1)
    ok = (c - ms >= seq.lo) & (c - ms <= seq.hi)
    if not ok.any():
        return 0.0
    a = seq.values[ms[ok] - seq.lo]
    b = seq.values[c - ms[ok] - seq.lo]
    return float(np.abs(a + s * b).max())


def aggregate_cancellation(seq: EtaSequence, n: int) -> complex:
    """``sum_{m=-n}^{n+k+l-1} eta_m``; vanishes when ``CK*C = -K``."""
    return seq.formal_sum(-n, n + seq.k + seq.l - 1)


def symmetric_reformulation_defect(seq: EtaSequence, n: int) -> complex:
    """``sum_{-n}^{-1} eta - sum_{k+l}^{n-1} eta - sum_{m=1}^{k+l} eta_{m+n-1}``; vanishes when ``CK*C = K``."""
    kl = seq.k + seq.l
    return (seq.formal_sum(-n, -1) - seq.formal_sum(kl, n - 1)
            - seq.formal_sum(n, n + kl - 1))


# -- exact identities ---------------------------------------------------------


def verify_telescoping(X: OperatorMatrix, U: OperatorMatrix, p: int, q: int) -> float:
    """Max-entry residual of ``P(p) - P(q) = sum_{m=p}^{q-1} U^m K U^(-m-1)``."""
    K = commutator(X, U)
    Uinv = _pow(U, -1)
    lhs = propagate(U, X, p).entries - propagate(U, X, q).entries
    rhs = formal_sum(lambda m: propagate(U, K, m).entries * Uinv[None, :], p, q - 1)
    return float(np.abs(lhs - rhs).max())


def _conjugation(X, gamma):
    if gamma is None:
        return Conjugation.canonical(X.measure)
    if isinstance(gamma, Conjugation):
        return gamma
    return Conjugation.from_gamma(gamma)


def c_defect(C: Conjugation, K: OperatorMatrix, sign: int) -> float:
    """``||C K* C - sign K||`` (spectral norm)."""
    return (c_transform(C, K) - sign * K).norm()


def _require(C, K, sign, tol):
    defect = c_defect(C, K, sign)
    scale = K.norm()
    if defect > tol * max(scale, np.finfo(float).tiny):
        rel = "-K" if sign < 0 else "K"
        raise PreconditionError(
            f"precondition C K* C = {rel} violated: defect {defect:.3e} (||K|| = {scale:.3e})",
            defect)


def lemma_sides(X, U, gamma, e: GridFunction, k: int, l: int, n: int, sign: int,
                tol: float = 1e-10) -> tuple[complex, complex]:
    """Left and right sides of the Lemma identity for the given sign of ``CK*C = +/-K``.

    ``sign=-1`` is the difference identity, ``sign=+1`` the sum identity with
    its boundary term ``((X + U^(k+l) X U^-(k+l)) U^k e, U^l ebar)``.
    """
    C = _conjugation(X, gamma)
    if U is None:
        U = multiplication_unitary(X.measure)
    K = commutator(X, U)
    _require(C, K, sign, tol)
    ebar = C(e)
    uk_e = shift(U, e, k)
    ul_eb = shift(U, ebar, l)
    Pn, Pm = propagate(U, X, n), propagate(U, X, -n)
    if sign < 0:
        lhs = inner((Pn - Pm) @ uk_e, ul_eb)
    else:
        lhs = inner((Pn + Pm) @ uk_e, ul_eb)
    Kn = propagate(U, K, n)
    rhs = formal_sum(lambda m: inner(Kn @ shift(U, e, k - m), shift(U, ebar, l - m + 1)),
                     1, k + l)
    if sign > 0:
        rhs += inner((X + propagate(U, X, k + l)) @ uk_e, ul_eb)
    return lhs, rhs


def verify_lemma_1(X, U, gamma, e, k, l, n, tol=1e-10) -> float:
    """``|LHS - RHS|`` of the difference identity; requires ``CK*C = -K``."""
    lhs, rhs = lemma_sides(X, U, gamma, e, k, l, n, -1, tol)
    return abs(lhs - rhs)


def verify_lemma_2(X, U, gamma, e, k, l, n, tol=1e-10) -> float:
    """``|LHS - RHS|`` of the sum identity; requires ``CK*C = K``."""
    lhs, rhs = lemma_sides(X, U, gamma, e, k, l, n, +1, tol)
    return abs(lhs - rhs)


def lemma_residual_table(X, U, gamma, e: GridFunction, kmax: int, ns, sign: int,
                         tol: float = 1e-10) -> np.ndarray:
    """``|LHS - RHS|`` of the Lemma identity for all ``|k|, |l| <= kmax`` and ``n`` in ``ns``.

    Same identity as ``lemma_sides``; the pairings are batched as
    ``B^H T A`` with ``A[:, p] = U^p e`` and ``B[:, q] = U^q ebar``.  The
    result has shape ``(2 kmax + 1, 2 kmax + 1, len(ns))`` indexed by
    ``(k + kmax, l + kmax, n)``.
    """
    C = _conjugation(X, gamma)
    if U is None:
        U = multiplication_unitary(X.measure)
    K = commutator(X, U)
    _require(C, K, sign, tol)
    ebar = C(e)
    r0 = -kmax - 1
    idx = np.arange(r0, kmax + 2)
    A = (power_table(U, idx) * e.orth[None, :]).T
    Bh = np.conj(power_table(U, idx) * ebar.orth[None, :])
    ks = np.arange(-kmax, kmax + 1)
    kk = ks - r0

    def block(T):
        return Bh @ T.entries @ A

    boundary = None
    if sign > 0:
        boundary = {s: block(X + propagate(U, X, s)) for s in range(-2 * kmax, 2 * kmax + 1)}
    out = np.empty((ks.size, ks.size, len(ns)))
    for c, n in enumerate(ns):
        Pn, Pm = propagate(U, X, int(n)), propagate(U, X, -int(n))
        L = block(Pn - Pm if sign < 0 else Pn + Pm)
        G = block(propagate(U, K, int(n)))
        for a, k in enumerate(ks):
            for b, l in enumerate(ks):
                rhs = formal_sum(lambda m: G[l - m + 1 - r0, k - m - r0], 1, int(k + l))
                if boundary is not None:
                    rhs += boundary[int(k + l)][l - r0, k - r0]
                out[a, b, c] = abs(L[kk[b], kk[a]] - rhs)
    return out


# -- the Proposition ----------------------------------------------------------


def symmetrize(X: OperatorMatrix, C: Conjugation, sign: int = 1) -> OperatorMatrix:
    """``(X + sign C X* C) / 2``: C-symmetric for ``sign=1``, C-antisymmetric for -1."""
    return (X + sign * c_transform(C, X)) * 0.5


def check_proposition_forward(X: OperatorMatrix, gamma=None,
                              U: Optional[OperatorMatrix] = None) -> float:
    """``||C K* C + K||`` for ``K = XU - UX``; zero whenever ``C X* C = X``."""
    C = _conjugation(X, gamma)
    if U is None:
        U = multiplication_unitary(X.measure)
    return c_defect(C, commutator(X, U), -1)


@dataclass(frozen=True)
class YDiagnostics:
    N: int
    norm_X: float
    commutator_defect: float  # ||YU - UY - K||
    symmetry_defect: float  # ||C Y* C - Y||

    @property
    def commutator_bound(self) -> float:
        return 4.0 * self.norm_X / self.N


def construct_Y(X: OperatorMatrix, U: Optional[OperatorMatrix] = None, gamma=None,
                N: int = 1) -> tuple[OperatorMatrix, YDiagnostics]:
    """Cesaro mean over ``n < N`` of ``Y_n = X - (P(n) + P(-n)) / 2``."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if U is None:
        U = multiplication_unitary(X.measure)
    C = _conjugation(X, gamma)
    A = cesaro_propagated(U, X, int(N), +1)
    B = cesaro_propagated(U, X, int(N), -1)
    Y = (X - (A + B) * 0.5).with_tag("Y")
    K = commutator(X, U)
    d1 = (commutator(Y, U) - K).norm()
    d2 = (c_transform(C, Y) - Y).norm()
    return Y, YDiagnostics(int(N), X.norm(), d1, d2)


def cesaro_decay_bound(U: OperatorMatrix, T: OperatorMatrix, N: int) -> np.ndarray:
    """Entrywise bound ``|T_ij| 2 / (N |1 - lambda_i conj(lambda_j)|)`` (inf on the diagonal)."""
    lam = _diag_unitary(U)
    gap = np.abs(1.0 - lam[:, None] * np.conj(lam)[None, :])
    with np.errstate(divide="ignore"):
        b = np.abs(T.entries) * 2.0 / (N * gap)
    np.fill_diagonal(b, math.inf)
    return b
