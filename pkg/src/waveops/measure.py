"""Atomic measures on the unit circle and their Fourier diagnostics.

Angles are stored in turns (``theta`` in [0, 1) stands for ``exp(2*pi*i*theta)``).
Generators whose atoms are rationals with a common denominator also keep the
integer numerators, so Fourier phases are reduced exactly.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from waveops import kernels

# largest common denominator kept for exact phase reduction: (den - 1)**2 must fit in uint64
_MAX_EXACT_DEN = 1 << 32


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite positive combination of point masses on the circle.

    Parameters
    ----------
    thetas : array_like
        Strictly increasing angles in turns, all in ``[0, 1)``.
    weights : array_like
        Positive masses, one per atom.
    label : str
        Name of the generator that produced the measure.
    numerators, denominator : optional
        Exact rational form ``thetas == numerators / denominator``.
    """

    thetas: np.ndarray
    weights: np.ndarray
    label: str = "custom"
    numerators: Optional[np.ndarray] = field(default=None, repr=False)
    denominator: Optional[int] = field(default=None, repr=False)

    def __post_init__(self):
        th = _frozen(self.thetas, np.float64).reshape(-1)
        w = _frozen(self.weights, np.float64).reshape(-1)
        if th.size == 0:
            raise ValueError("a measure needs at least one atom")
        if th.shape != w.shape:
            raise ValueError(f"{th.size} angles but {w.size} weights")
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(w))):
            raise ValueError("angles and weights must be finite")
        if th[0] < 0.0 or th[-1] >= 1.0:
            raise ValueError("angles must lie in [0, 1)")
        if np.any(np.diff(th) <= 0.0):
            raise ValueError("angles must be strictly increasing (no repeated atoms)")
        if np.any(w <= 0.0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "weights", w)
        nums, den = self.numerators, self.denominator
        if nums is not None:
            if den is None or not 0 < den < _MAX_EXACT_DEN:
                raise ValueError("exact numerators need a denominator below 2**32")
            nums = _frozen(nums, np.uint64).reshape(-1)
            if nums.shape != th.shape or np.any(nums >= den):
                raise ValueError("numerators do not match the angles")
            object.__setattr__(self, "numerators", nums)
            object.__setattr__(self, "denominator", int(den))
        else:
            object.__setattr__(self, "denominator", None)

    # -- basic quantities -------------------------------------------------

    @property
    def size(self) -> int:
        return int(self.thetas.size)

    def __len__(self):
        return self.size

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    @cached_property
    def points(self) -> np.ndarray:
        """Atoms as unit complex numbers."""
        p = np.exp(2j * np.pi * self.thetas)
        p.setflags(write=False)
        return p

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        s = np.sqrt(self.weights)
        s.setflags(write=False)
        return s

    @cached_property
    def min_gap(self) -> float:
        """Smallest cyclic distance (in turns) between neighbouring atoms; 1 for a single atom."""
        if self.size == 1:
            return 1.0
        gaps = np.diff(self.thetas)
        wrap = 1.0 - self.thetas[-1] + self.thetas[0]
        return float(min(gaps.min(), wrap))

    @cached_property
    def min_gap_phase(self) -> float:
        """``min |1 - exp(2*pi*i*(theta_i - theta_j))|`` over distinct atoms (2 for a single atom)."""
        if self.size == 1:
            return 2.0
        return float(2.0 * math.sin(math.pi * self.min_gap))

    @cached_property
    def horizon(self) -> int:
        """Effective horizon ``ceil(10 / min_gap)``; convergence claims stop here."""
        return int(math.ceil(10.0 / self.min_gap))

    @cached_property
    def atomic_mass(self) -> float:
        """``sum w_j**2``, the limit of the Wiener averages."""
        return math.fsum(self.weights**2)

    def frac_turns(self, ns) -> np.ndarray:
        """Fractional part of ``n * theta_j``, shape ``(len(ns), size)``."""
        return kernels.frac_turns(np.atleast_1d(ns), self.thetas, self.numerators,
                                  self.denominator)

    def powers(self, n: int) -> np.ndarray:
        """``points ** n`` with exactly reduced phases."""
        return np.exp(2j * np.pi * self.frac_turns([n])[0])

    def phasor_sums(self, coef, n0: int, count: int, sign: int = 1) -> np.ndarray:
        coef = np.atleast_2d(np.asarray(coef, dtype=np.complex128))
        return kernels.phasor_sums(coef, self.thetas, self.numerators, self.denominator,
                                   int(n0), int(count), sign)

    @cached_property
    def content_hash(self) -> str:
        from waveops.io import measure_to_text

        return hashlib.sha256(measure_to_text(self).encode()).hexdigest()

    def normalized(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.thetas, self.weights / self.total_mass, self.label,
                               self.numerators, self.denominator)


@dataclass(frozen=True)
class FourierProfile:
    """Fourier coefficients on ``n = start .. start + len(values) - 1``.

    ``cesaro_abs[i]`` is the mean of ``|values[0..i]|``.
    """

    start: int
    values: np.ndarray
    cesaro_abs: np.ndarray

    @property
    def ns(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self.values))

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def block_maxima(self, edges: Sequence[int]) -> np.ndarray:
        """``max |mu_hat(n)|`` on ``[edges[i], edges[i+1])``; the last block runs to the end."""
        ns, a = self.ns, self.abs
        bounds = list(edges) + [int(ns[-1]) + 1]
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sel = a[(ns >= lo) & (ns < hi)]
            out.append(sel.max() if sel.size else 0.0)
        return np.array(out)


def _from_rationals(nums, den, weights, label, normalize):
    nums = np.asarray(nums, dtype=np.uint64)
    order = np.argsort(nums, kind="stable")
    nums = nums[order]
    weights = np.asarray(weights, dtype=np.float64)[order]
    if normalize:
        weights = weights / math.fsum(weights)
    exact = den < _MAX_EXACT_DEN
    return DiscreteMeasure(nums.astype(np.float64) / den, weights, label,
                           nums if exact else None, den if exact else None)


def from_atoms(thetas, weights, label="custom", normalize=False) -> DiscreteMeasure:
    """Measure from explicit atoms; angles are sorted and reduced mod 1."""
    th = np.mod(np.asarray(thetas, dtype=np.float64), 1.0)
    w = np.asarray(weights, dtype=np.float64)
    order = np.argsort(th, kind="stable")
    w = w[order]
    if normalize:
        w = w / math.fsum(w)
    return DiscreteMeasure(th[order], w, label)


def make_uniform(m: int, normalize: bool = True) -> DiscreteMeasure:
    """``m`` equal atoms at ``j/m``: a stand-in for Lebesgue measure."""
    if int(m) != m or m < 1:
        raise ValueError(f"uniform measure needs m >= 1, got {m}")
    m = int(m)
    w = np.full(m, 1.0 / m) if normalize else np.ones(m)
    return _from_rationals(np.arange(m), m, w, f"uniform(m={m})", False)


def make_cantor(level: int) -> DiscreteMeasure:
    """Level-``L`` approximation of the middle-thirds Cantor measure.

    Atoms are ``sum_k eps_k * 2 / 3**k`` over ``eps in {0, 1}**L``, each of
    mass ``2**-L``.
    """
    if int(level) != level or not 1 <= level <= 20:
        raise ValueError(f"cantor level must be in [1, 20], got {level}")
    level = int(level)
    den = 3**level
    nums = np.zeros(1, dtype=np.uint64)
    for k in range(1, level + 1):
        nums = np.concatenate([nums, nums + np.uint64(2 * 3 ** (level - k))])
    w = np.full(nums.size, 2.0**-level)
    return _from_rationals(nums, den, w, f"cantor(L={level})", False)


def make_riesz(coeffs: Sequence[float], freqs: Sequence[int], m: int,
               normalize: bool = True) -> DiscreteMeasure:
    """Finite Riesz product ``prod_q (1 + a_q cos(2 pi n_q theta))`` sampled on ``j/m``."""
    coeffs = [float(a) for a in coeffs]
    freqs = [int(n) for n in freqs]
    if len(coeffs) != len(freqs):
        raise ValueError("coeffs and freqs must have the same length")
    if int(m) != m or m < 1:
        raise ValueError(f"grid must be a positive integer, got {m}")
    m = int(m)
    for a in coeffs:
        if not abs(a) < 1.0:
            raise ValueError(f"|a_q| must be < 1 (density must stay positive), got {a}")
    if freqs:
        if freqs[0] < 1:
            raise ValueError("frequencies must be positive")
        for n0, n1 in zip(freqs, freqs[1:]):
            if n1 < 3 * n0:
                raise ValueError(f"frequencies must be lacunary (n_(q+1) >= 3 n_q): {n0}, {n1}")
        if m <= 2 * freqs[-1]:
            raise ValueError(f"grid m={m} must exceed 2*max(freqs)={2 * freqs[-1]}")
    j = np.arange(m)
    dens = np.ones(m)
    for a, n in zip(coeffs, freqs):
        dens *= 1.0 + a * np.cos(2 * np.pi * ((n * j) % m) / m)
    w = dens / m
    label = "riesz(" + ",".join(f"{a:g}@{n}" for a, n in zip(coeffs, freqs)) + f";m={m})"
    return _from_rationals(j, m, w, label, normalize)


def make_random(m: int, seed: int, normalize: bool = True) -> DiscreteMeasure:
    """``m`` atoms at uniformly random angles with exponential weights."""
    if int(m) != m or m < 1:
        raise ValueError(f"random measure needs m >= 1, got {m}")
    rng = np.random.default_rng(seed)
    th = np.unique(rng.random(int(m)))
    while th.size < m:  # pragma: no cover - collisions are astronomically rare
        th = np.unique(np.concatenate([th, rng.random(int(m) - th.size)]))
    w = rng.exponential(size=th.size)
    return from_atoms(th, w, f"random(m={m},seed={seed})", normalize)


def same_measure(a, b) -> bool:
    """Identity, or identical atoms and weights."""
    if a is b:
        return True
    if not isinstance(a, DiscreteMeasure) or not isinstance(b, DiscreteMeasure):
        return False
    return (a.size == b.size and np.array_equal(a.thetas, b.thetas)
            and np.array_equal(a.weights, b.weights))


def _weight_values(mu, weight):
    if weight is None:
        return mu.weights
    if not same_measure(getattr(weight, "measure", None), mu):
        raise ValueError("weight function lives on a different measure")
    return mu.weights * np.asarray(weight.values)


def fourier_coefficients(mu: DiscreteMeasure, ns, weight=None) -> np.ndarray:
    """``sum_j w_j f_j exp(-2 pi i n theta_j)`` for each ``n`` in ``ns``."""
    c = _weight_values(mu, weight)
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    if ns.size and np.all(np.diff(ns) == 1):
        return mu.phasor_sums(c, ns[0], ns.size, sign=-1)[0]
    ph = np.exp(-2j * np.pi * mu.frac_turns(ns))
    return ph @ np.asarray(c, dtype=np.complex128)


def fourier_coefficient(mu: DiscreteMeasure, n: int, weight=None) -> complex:
    return complex(fourier_coefficients(mu, [int(n)], weight)[0])


def cantor_closed_form(level: int, ns) -> np.ndarray:
    """``prod_{k<=L} (1 + exp(-4 pi i n / 3**k)) / 2``, phases reduced in integers."""
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    out = np.ones(ns.shape, dtype=np.complex128)
    for k in range(1, level + 1):
        d = 3**k
        r = np.mod(2 * np.mod(ns, d), d).astype(np.float64) / d
        out *= (1.0 + np.exp(-2j * np.pi * r)) / 2.0
    return out


def wiener_average(mu: DiscreteMeasure, N: int) -> float:
    """``(1/N) sum_{n=1..N} |mu_hat(n)|**2``."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    vals = mu.phasor_sums(mu.weights, 1, int(N), sign=-1)[0]
    return math.fsum(np.abs(vals) ** 2) / N


def wiener_bound(mu: DiscreteMeasure, N: int) -> float:
    """Upper bound on ``|wiener_average(mu, N) - sum w_j**2|``."""
    off = mu.total_mass**2 - mu.atomic_mass
    return max(off, 0.0) * 2.0 / (N * mu.min_gap_phase)


def decay_profile(mu: DiscreteMeasure, N_max: int) -> FourierProfile:
    """Coefficients for ``0 <= n <= N_max`` with running means of their moduli."""
    if int(N_max) != N_max or N_max < 1:
        raise ValueError(f"N_max must be a positive integer, got {N_max}")
    vals = mu.phasor_sums(mu.weights, 0, int(N_max) + 1, sign=-1)[0]
    ces = np.cumsum(np.abs(vals)) / np.arange(1, vals.size + 1)
    return FourierProfile(0, vals, ces)
