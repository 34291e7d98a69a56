"""Experiment specs and Cesaro convergence experiments.

A spec is a TOML file; every section below is a table and unknown keys are
rejected::

    n_grid = [16, 32, 64]          # strictly increasing, required
    output_dir = "out"

    [measure]                      # kind: uniform | cantor | riesz | random | file
    kind = "cantor"
    level = 7

    [operator]                     # kind: rank_two | counterexample | random_kernel | kernel_file
    kind = "rank_two"
    symmetry = "antisymmetric"     # antisymmetric | symmetric | none
    seed = 1

    [vectors]                      # family: monomial | file
    family = "monomial"
    k_range = [-4, 4]

    [tolerances]
    identity = 1e-10
    condition = 1e-10
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from waveops import io as wio
from waveops.hilbert import Conjugation, GridFunction, OperatorMatrix, integral_operator
from waveops.measure import (DiscreteMeasure, make_cantor, make_random, make_riesz,
                             make_uniform)
from waveops.symmetry import (ANTISYMMETRIC, SYMMETRIC, counterexample_kernel,
                              make_rank_two, random_kernel, random_rank_two,
                              solve_identification)
from waveops.wave import cesaro_means

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

TOOL_VERSION = "0.1.0"


class SpecError(ValueError):
    """The spec cannot be parsed or refers to missing inputs (exit status 2)."""


class InfeasibleSpec(ValueError):
    """The spec parses but asks for an impossible object (exit status 1)."""


_SCHEMA = {
    "measure": {"kind", "m", "level", "coeffs", "freqs", "seed", "path", "normalize"},
    "operator": {"kind", "symmetry", "seed", "gamma", "exponents", "degree", "path"},
    "vectors": {"family", "k_range", "path"},
    "tolerances": {"identity", "condition"},
    "fourier": {"n_max", "wiener_n"},
    "verify": {"n_values", "k_max", "y_grid"},
}
_TOP = {"n_grid", "output_dir"}

_MEASURE_KINDS = {"uniform", "cantor", "riesz", "random", "file"}
_OPERATOR_KINDS = {"rank_two", "counterexample", "random_kernel", "kernel_file"}
_SYMMETRIES = {ANTISYMMETRIC, SYMMETRIC, "none"}

RIESZ_DEMO = {"kind": "riesz", "coeffs": [0.5, 0.4, 0.3, 0.2], "freqs": [1, 4, 16, 64],
              "m": 256}


@dataclass
class ExperimentSpec:
    measure: dict
    operator: dict = field(default_factory=lambda: {"kind": "rank_two", "seed": 0})
    vectors: dict = field(default_factory=lambda: {"family": "monomial", "k_range": [-4, 4]})
    n_grid: list = field(default_factory=lambda: [2**p for p in range(4, 13)])
    tolerances: dict = field(default_factory=lambda: {"identity": 1e-10, "condition": 1e-10})
    output_dir: str = "out"
    fourier: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd, repr=False)
    inputs: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        return {"measure": self.measure, "operator": self.operator, "vectors": self.vectors,
                "n_grid": list(self.n_grid), "tolerances": self.tolerances,
                "fourier": self.fourier, "verify": self.verify}

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, seed=None, tol=None, out=None) -> "ExperimentSpec":
        s = copy.deepcopy(self)
        if seed is not None:
            s.operator["seed"] = int(seed)
            if s.measure.get("kind") == "random":
                s.measure["seed"] = int(seed)
        if tol is not None:
            s.tolerances["identity"] = float(tol)
        if out is not None:
            s.output_dir = str(out)
        validate(s)
        return s


def _int_list(v, what):
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise SpecError(f"{what} must be a list of integers")
    return v


def validate(spec: ExperimentSpec) -> None:
    """Raise SpecError unless the spec is well formed and its files exist."""
    grid = _int_list(spec.n_grid, "n_grid")
    if not grid:
        raise SpecError("n_grid must not be empty")
    if grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise SpecError("n_grid must be strictly increasing positive integers")
    ms = spec.measure
    kind = ms.get("kind")
    if kind not in _MEASURE_KINDS:
        raise SpecError(f"measure.kind must be one of {sorted(_MEASURE_KINDS)}, got {kind!r}")
    need = {"uniform": ["m"], "cantor": ["level"], "riesz": ["coeffs", "freqs", "m"],
            "random": ["m", "seed"], "file": ["path"]}[kind]
    for key in need:
        if key not in ms:
            raise SpecError(f"measure.{key} is required for kind {kind!r}")
    if kind == "file" and not spec.resolve(ms["path"]).is_file():
        raise SpecError(f"measure file not found: {spec.resolve(ms['path']).resolve()}")
    op = spec.operator
    okind = op.get("kind")
    if okind not in _OPERATOR_KINDS:
        raise SpecError(f"operator.kind must be one of {sorted(_OPERATOR_KINDS)}, got {okind!r}")
    if op.get("symmetry", ANTISYMMETRIC) not in _SYMMETRIES:
        raise SpecError(f"operator.symmetry must be one of {sorted(_SYMMETRIES)}")
    random_op = okind == "random_kernel" or (okind == "rank_two" and "exponents" not in op) \
        or op.get("gamma") == "random"
    if random_op and "seed" not in op:
        raise SpecError("operator.seed is required for randomly generated operators")
    if okind == "kernel_file":
        if "path" not in op:
            raise SpecError("operator.path is required for kind 'kernel_file'")
        if not spec.resolve(op["path"]).is_file():
            raise SpecError(f"kernel file not found: {spec.resolve(op['path']).resolve()}")
    if "exponents" in op:
        ex = _int_list(op["exponents"], "operator.exponents")
        if len(ex) != 4:
            raise SpecError("operator.exponents must list four integers (u1, v1, u2, v2)")
    vec = spec.vectors
    fam = vec.get("family", "monomial")
    if fam == "monomial":
        kr = _int_list(vec.get("k_range", [-4, 4]), "vectors.k_range")
        if len(kr) != 2 or kr[0] > kr[1]:
            raise SpecError("vectors.k_range must be [lo, hi] with lo <= hi")
    elif fam == "file":
        if "path" not in vec or not spec.resolve(vec["path"]).is_file():
            raise SpecError(f"vectors file not found: {vec.get('path')}")
    else:
        raise SpecError(f"vectors.family must be 'monomial' or 'file', got {fam!r}")
    for key, val in spec.tolerances.items():
        if not isinstance(val, (int, float)) or val <= 0:
            raise SpecError(f"tolerances.{key} must be a positive number")


def parse_spec(text: str, base_dir=None, source_name="<spec>") -> ExperimentSpec:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{source_name}: {exc}") from exc
    for key, val in raw.items():
        if key in _SCHEMA:
            if not isinstance(val, dict):
                raise SpecError(f"[{key}] must be a table")
            extra = set(val) - _SCHEMA[key]
            if extra:
                raise SpecError(f"unknown key(s) in [{key}]: {', '.join(sorted(extra))}")
        elif key not in _TOP:
            raise SpecError(f"unknown key {key!r}")
    if "measure" not in raw:
        raise SpecError("[measure] section is required")
    defaults = ExperimentSpec(measure={})
    tol = dict(defaults.tolerances)
    tol.update(raw.get("tolerances", {}))
    spec = ExperimentSpec(
        measure=dict(raw["measure"]),
        operator=dict(raw.get("operator", defaults.operator)),
        vectors=dict(raw.get("vectors", defaults.vectors)),
        n_grid=raw.get("n_grid", defaults.n_grid),
        tolerances=tol,
        output_dir=str(raw.get("output_dir", "out")),
        fourier=dict(raw.get("fourier", {})),
        verify=dict(raw.get("verify", {})),
        base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
    )
    validate(spec)
    return spec


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"spec file not found: {path}")
    spec = parse_spec(path.read_text(), path.parent, str(path))
    spec.inputs[str(path)] = wio.sha256_file(path)
    return spec


# -- builders -----------------------------------------------------------------


def build_measure(spec: ExperimentSpec) -> DiscreteMeasure:
    ms = spec.measure
    kind = ms["kind"]
    norm = bool(ms.get("normalize", True))
    try:
        if kind == "uniform":
            return make_uniform(ms["m"], norm)
        if kind == "cantor":
            mu = make_cantor(ms["level"])
            return mu if norm else mu
        if kind == "riesz":
            return make_riesz(ms["coeffs"], ms["freqs"], ms["m"], norm)
        if kind == "random":
            return make_random(ms["m"], ms["seed"], norm)
    except ValueError as exc:
        raise SpecError(f"measure: {exc}") from exc
    path = spec.resolve(ms["path"])
    spec.inputs[str(path)] = wio.sha256_file(path)
    try:
        mu = wio.load_measure(path)
    except ValueError as exc:
        raise SpecError(f"{path}: {exc}") from exc
    return mu.normalized() if norm else mu


def _unimodular(mu, rng):
    return GridFunction(mu, np.exp(2j * np.pi * rng.random(mu.size)))


@dataclass
class Commutator:
    """An identification operator X and the kernel k of ``K = XU - UX``."""

    kernel: object
    X: OperatorMatrix
    symmetry: str
    gamma: Optional[GridFunction] = None


def build_commutator(spec: ExperimentSpec, mu: DiscreteMeasure) -> Commutator:
    op = spec.operator
    kind = op["kind"]
    sym = op.get("symmetry", ANTISYMMETRIC)
    rng = np.random.default_rng(op.get("seed", 0))
    gamma = None
    if kind == "rank_two":
        if "exponents" in op:
            a1, b1, a2, b2 = op["exponents"]
            if a1 + b1 != a2 + b2:
                raise InfeasibleSpec(
                    f"rank-two commutator needs u1 v1 = u2 v2; z^{a1} z^{b1} != z^{a2} z^{b2}")
            u1, v1, u2, v2 = (GridFunction.monomial(mu, a) for a in (a1, b1, a2, b2))
            k, gamma = make_rank_two(u1, v1, u2, v2)
        else:
            k, gamma = random_rank_two(mu, rng, int(op.get("degree", 3)))
        sym = ANTISYMMETRIC
    elif kind == "counterexample":
        k = counterexample_kernel(mu)
    elif kind == "random_kernel":
        if op.get("gamma", "one") == "random":
            gamma = _unimodular(mu, rng)
        k = random_kernel(mu, sym, rng, gamma)
    else:
        path = spec.resolve(op["path"])
        spec.inputs[str(path)] = wio.sha256_file(path)
        try:
            k = wio.kernel_from_csv(path.read_text(), mu)
        except ValueError as exc:
            raise SpecError(f"{path}: {exc}") from exc
    try:
        x = solve_identification(k, spec.tolerances["condition"])
    except ValueError as exc:
        raise InfeasibleSpec(str(exc)) from exc
    return Commutator(k, integral_operator(x).with_tag("X"), sym, gamma)


def build_vectors(spec: ExperimentSpec, mu: DiscreteMeasure):
    """Test pairs ``(label, h1, h2)``; the monomial family pairs ``U^k 1`` with ``U^l C1``."""
    vec = spec.vectors
    if vec.get("family", "monomial") == "monomial":
        lo, hi = vec.get("k_range", [-4, 4])
        ebar = Conjugation.canonical(mu)(GridFunction.constant(mu, 1.0))
        mons = {k: GridFunction.monomial(mu, k) for k in range(lo, hi + 1)}
        return [(f"k{k}_l{l}", mons[k], mons[l] * ebar)
                for k in range(lo, hi + 1) for l in range(lo, hi + 1)]
    path = spec.resolve(vec["path"])
    spec.inputs[str(path)] = wio.sha256_file(path)
    return load_vectors(path.read_text(), mu)


def load_vectors(text: str, mu: DiscreteMeasure):
    """CSV ``pair,role,i,re,im`` with role ``h1`` or ``h2``; one h1 and one h2 per pair."""
    import csv
    import io

    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["pair", "role", "i", "re", "im"]:
        raise SpecError("vectors file needs header pair,role,i,re,im")
    data: dict = {}
    for r in rows[1:]:
        if not r:
            continue
        vals = data.setdefault(r[0], {}).setdefault(r[1], np.zeros(mu.size, complex))
        vals[int(r[2])] = complex(float(r[3]), float(r[4]))
    out = []
    for name in sorted(data):
        if set(data[name]) != {"h1", "h2"}:
            raise SpecError(f"vector pair {name!r} needs both h1 and h2")
        out.append((name, GridFunction(mu, data[name]["h1"]), GridFunction(mu, data[name]["h2"])))
    return out


# -- the experiment -----------------------------------------------------------


@dataclass
class Trace:
    label: str
    cesaro_diff: np.ndarray
    cesaro_sum: np.ndarray
    raw: np.ndarray


@dataclass
class ConvergenceReport:
    grid: np.ndarray
    traces: list
    horizon: int
    fits: dict
    measure_hash: str
    spec: dict
    inputs: dict

    @property
    def beyond_horizon(self) -> np.ndarray:
        return self.grid > self.horizon

    def trace(self, label) -> Trace:
        for t in self.traces:
            if t.label == label:
                return t
        raise KeyError(label)

    def manifest(self) -> dict:
        return {
            "measure_hash": self.measure_hash,
            "spec": self.spec,
            "horizon": self.horizon,
            "fits": self.fits,
            "grid": [int(n) for n in self.grid],
            "beyond_horizon": [int(n) for n in self.grid[self.beyond_horizon]],
            "inputs": dict(sorted(self.inputs.items())),
            "test_family": [t.label for t in self.traces],
            "tool_version": TOOL_VERSION,
        }

    def write(self, out_dir) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for t in self.traces:
            p = out / f"trace_{t.label}.csv"
            lines = ["N,cesaro_diff_re,cesaro_diff_im,cesaro_sum_re,cesaro_sum_im,raw_re,raw_im"]
            for N, d, s, r in zip(self.grid, t.cesaro_diff, t.cesaro_sum, t.raw):
                lines.append(",".join([str(int(N))] + [wio.fmt(v) for v in
                                                       (d.real, d.imag, s.real, s.imag,
                                                        r.real, r.imag)]))
            p.write_text("\n".join(lines) + "\n")
            written.append(p)
        p = out / "manifest.json"
        p.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        written.append(p)
        return written


def propagated_pairings(X: OperatorMatrix, pairs, count: int):
    """Raw pairings ``(U^n X U^-n h1, h2)`` and ``(U^-n X U^n h1, h2)`` for ``0 <= n < count``.

    Returns two arrays of shape ``(len(pairs), count)``.  Uses
    ``(U^n X U^-n h1)_i = lambda_i^n sum_j X_ij h1_j conj(lambda_j)^n``.
    """
    mu = X.measure
    lam_pow = np.exp(2j * np.pi * mu.frac_turns(np.arange(count)))  # (count, m)
    fwd = np.zeros((len(pairs), count), dtype=np.complex128)
    bwd = np.zeros_like(fwd)
    cache: dict = {}
    for a, (_, h1, h2) in enumerate(pairs):
        key = id(h1)
        if key not in cache:
            coef = X.entries * h1.orth[None, :]
            cache[key] = (mu.phasor_sums(coef, 0, count, sign=-1),
                          mu.phasor_sums(coef, 0, count, sign=+1))
        Wf, Wb = cache[key]
        g = np.conj(h2.orth)[:, None]
        fwd[a] = np.sum(g * lam_pow.T * Wf, axis=0)
        bwd[a] = np.sum(g * np.conj(lam_pow.T) * Wb, axis=0)
    return fwd, bwd


def _fit(grid, values, horizon):
    sel = (grid <= horizon) & (np.abs(values) > 0)
    if sel.sum() < 5:
        return None
    slope, icpt = np.polyfit(np.log(grid[sel]), np.log(np.abs(values[sel])), 1)
    return {"exponent": float(slope), "prefactor": float(math.exp(icpt)),
            "points": int(sel.sum())}


def run_experiment(spec: ExperimentSpec) -> ConvergenceReport:
    mu = build_measure(spec)
    comm = build_commutator(spec, mu)
    pairs = build_vectors(spec, mu)
    grid = np.asarray(spec.n_grid, dtype=np.int64)
    n_max = int(grid[-1])
    fwd, bwd = propagated_pairings(comm.X, pairs, n_max + 1)
    traces, fits = [], {}
    for a, (label, _, _) in enumerate(pairs):
        diff = fwd[a] - bwd[a]
        tot = fwd[a] + bwd[a]
        t = Trace(label, cesaro_means(diff, grid), cesaro_means(tot, grid), diff[grid])
        traces.append(t)
        fits[label] = _fit(grid, t.cesaro_diff, mu.horizon)
    return ConvergenceReport(grid, traces, mu.horizon, fits, mu.content_hash,
                             spec.as_dict(), dict(spec.inputs))


def decay_ratio(report: ConvergenceReport, n_lo: int, n_hi: int) -> dict:
    """``|cesaro_diff(n_lo)| / |cesaro_diff(n_hi)|`` per trace."""
    i = int(np.searchsorted(report.grid, n_lo))
    j = int(np.searchsorted(report.grid, n_hi))
    out = {}
    for t in report.traces:
        a, b = abs(t.cesaro_diff[i]), abs(t.cesaro_diff[j])
        out[t.label] = a / b if b > 0 else math.inf
    return out


def cauchy_tail(report: ConvergenceReport, n_end: int, scale: str = "family") -> dict:
    """Sup of successive differences of each sum trace over ``[n_end/2, n_end]``.

    Steps are divided by the largest ``|cesaro_sum|`` of the whole test family
    (``scale="family"``) or of the trace itself (``scale="trace"``).
    """
    g = report.grid
    sel = np.flatnonzero((g >= n_end / 2) & (g <= n_end))
    family = max(float(np.abs(t.cesaro_sum).max()) for t in report.traces)
    out = {}
    for t in report.traces:
        s = t.cesaro_sum
        ref = family if scale == "family" else float(np.abs(s).max())
        steps = np.abs(np.diff(s[sel])) if sel.size > 1 else np.zeros(1)
        out[t.label] = float(steps.max()) / ref if ref > 0 else 0.0
    return out


def spec_digest(spec: ExperimentSpec) -> str:
    return hashlib.sha256(json.dumps(spec.as_dict(), sort_keys=True).encode()).hexdigest()
