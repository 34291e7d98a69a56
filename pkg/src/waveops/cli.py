"""Command line front end: ``waveops verify|converge|fourier``.

Exit status is 0 on success, 1 when a check fails or the requested operator
cannot exist, and 2 on usage or spec errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from waveops import io as wio
from waveops.experiment import (RIESZ_DEMO, TOOL_VERSION, ExperimentSpec, InfeasibleSpec,
                                SpecError, build_commutator, build_measure, load_spec,
                                run_experiment)
from waveops.hilbert import (Conjugation, GridFunction, integral_operator,
                             multiplication_unitary)
from waveops.measure import (decay_profile, make_cantor, make_riesz, make_uniform,
                             wiener_average, wiener_bound)
from waveops.symmetry import (ANTISYMMETRIC, check_kernel_condition,
                              counterexample_identification, counterexample_kernel,
                              find_gamma, identification_cond, make_rank_two,
                              solve_identification, split_counterexample)
from waveops.wave import (aggregate_cancellation, cesaro, check_proposition_forward,
                          frac_multiple,
                          commutator, construct_Y, eta_antisymmetry_defect, eta_family,
                          eta_symmetry_defect, lemma_residual_table,
                          symmetric_reformulation_defect,
                          symmetrize, verify_telescoping)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

VERIFY_DEFAULTS = {"n_values": [0, 1, 2, 7, 25, 64], "k_max": 4,
                   "y_grid": [50, 100, 200, 400, 800, 1600]}


@dataclass
class Check:
    name: str
    residual: float
    bound: float
    passed: Optional[bool] = None
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed is None:
            self.passed = bool(self.residual <= self.bound)

    def to_dict(self) -> dict:
        return {"name": self.name, "residual": _num(self.residual), "bound": _num(self.bound),
                "passed": self.passed, **({"detail": self.detail} if self.detail else {})}


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else str(x)


def _report(target: str, checks: list) -> dict:
    return {"target": target, "passed": all(c.passed for c in checks),
            "checks": [c.to_dict() for c in checks], "tool_version": TOOL_VERSION}


# -- verify -------------------------------------------------------------------


def commutator_check(name, k, x_kernel, tol=1e-10, cond_scale=True) -> Check:
    """``XU - UX`` against the integral operator of ``k``, in kernel coordinates."""
    X = integral_operator(x_kernel)
    got = commutator(X, multiplication_unitary(k.measure)).to_kernel().values
    res = float(np.abs(got - k.values).max())
    bound = tol * max(1.0, identification_cond(k)) if cond_scale else tol
    return Check(name, res, bound)


def worked_examples(seed: int = 0) -> list:
    """Counterexample split, rank-two gauge and scalar Cesaro checks."""
    checks = []
    rng = np.random.default_rng(seed)
    for mu in (make_uniform(16), make_cantor(4)):
        tag = mu.label
        k = counterexample_kernel(mu)
        rep = find_gamma(k, ANTISYMMETRIC)
        checks.append(Check(f"{tag}: counterexample has no antisymmetric gauge",
                            0.0, 0.0, rep.witness is not None, {"witness": rep.witness}))
        k1, k2, g1, g2 = split_counterexample(mu)
        split = float(np.abs(k1.values + k2.values - k.values).max())
        checks.append(Check(f"{tag}: split sums to the counterexample", split, 1e-14))
        for i, (kk, g) in enumerate(((k1, g1), (k2, g2)), start=1):
            r = check_kernel_condition(kk, g, ANTISYMMETRIC, tol=1e-12)
            checks.append(Check(f"{tag}: split part {i} satisfies its gauge condition",
                                r.residual, 1e-12))
        ratio = g1.values / g2.values
        spread = float(np.abs(ratio - ratio[0]).max())
        checks.append(Check(f"{tag}: split gauges are not proportional",
                            spread, 0.0, spread > 1e-6))
        checks.append(commutator_check(f"{tag}: XU - UX = K for the explicit X", k,
                                       counterexample_identification(mu), cond_scale=False))
        for trial in range(3):
            a1, b1, a2 = (int(v) for v in rng.integers(-5, 6, 3))
            b2 = a1 + b1 - a2
            u1, v1, u2, v2 = (GridFunction.monomial(mu, e) for e in (a1, b1, a2, b2))
            kr, g = make_rank_two(u1, v1, u2, v2)
            r = check_kernel_condition(kr, g, ANTISYMMETRIC, tol=1e-12)
            checks.append(Check(f"{tag}: rank-two z^({a1},{b1},{a2},{b2}) gauge u1/v2",
                                r.residual, 1e-12))
            if kr.max_abs > 0:
                checks.append(commutator_check(
                    f"{tag}: rank-two z^({a1},{b1},{a2},{b2}) identification",
                    kr, solve_identification(kr)))
    t = rng.random(100)
    Ns = rng.integers(1, 10_001, 100)
    worst = 0.0
    for ti, N in zip(t, Ns):
        seq = np.exp(2j * np.pi * frac_multiple(ti, np.arange(N)))
        w = np.exp(2j * np.pi * ti)
        wN = np.exp(2j * np.pi * frac_multiple(ti, [N])[0])
        worst = max(worst, abs(cesaro(seq, int(N)) - (1 - wN) / (N * (1 - w))))
    checks.append(Check("scalar Cesaro mean of omega^n matches the closed form", worst, 1e-14))
    return checks


def _gauge(comm, sign, tol):
    """Gauge for the claimed symmetry: the builder's, else one found from the kernel."""
    if comm.gamma is not None:
        rep = check_kernel_condition(comm.kernel, comm.gamma, sign, tol)
    else:
        rep = find_gamma(comm.kernel, sign, tol=tol)
    return rep


def identity_suite(spec: ExperimentSpec) -> list:
    """Run every identity that applies to the spec's operator."""
    mu = build_measure(spec)
    comm = build_commutator(spec, mu)
    tol = float(spec.tolerances["identity"])
    opts = dict(VERIFY_DEFAULTS, **spec.verify)
    X, k = comm.X, comm.kernel
    U = multiplication_unitary(mu)
    K = commutator(X, U)
    nX = X.norm()
    checks = [commutator_check("XU - UX = K", k, X.to_kernel(), tol)]
    for p, q in ((0, 5), (-3, 4), (2, -6)):
        checks.append(Check(f"telescoping P({p}) - P({q})", verify_telescoping(X, U, p, q),
                            tol * max(1.0, nX)))
    if comm.symmetry == "none":
        return checks
    sign = -1 if comm.symmetry == ANTISYMMETRIC else +1
    rel = "-K" if sign < 0 else "K"
    rep = _gauge(comm, comm.symmetry, tol)
    name = f"precondition C K* C = {rel} ({comm.symmetry} kernel condition)"
    checks.append(Check(name, rep.residual, tol, rep.passed,
                        {"witness": rep.witness} if rep.witness else {}))
    if not rep.passed:
        return checks
    C = Conjugation.from_gamma(rep.gamma)
    if not C.unimodular:
        checks.append(Check("lemma identities", 0.0, 0.0, True,
                            {"skipped": "gauge is not unimodular, so C is not an involution"}))
        return checks
    rng = np.random.default_rng(spec.operator.get("seed", 0))
    e = GridFunction(mu, rng.standard_normal(mu.size) + 1j * rng.standard_normal(mu.size))
    e_sq = e.norm() ** 2
    kmax = int(opts["k_max"])
    ns = [int(n) for n in opts["n_values"]]
    worst = float(lemma_residual_table(X, U, C, e, kmax, ns, sign, tol).max())
    label = "difference" if sign < 0 else "sum"
    checks.append(Check(f"lemma ({label} identity), relative to ||X|| ||e||^2",
                        worst / max(nX * e_sq, 1e-300), tol))
    n_top = max(ns)
    lo, hi = -n_top - 1, n_top + 2 * kmax + 1
    fam = eta_family(K, U, e, C(e), range(-kmax, kmax + 1), range(-kmax, kmax + 1), lo, hi)
    refl = agg = 0.0
    for seq in fam.values():
        refl = max(refl, eta_antisymmetry_defect(seq) if sign < 0 else eta_symmetry_defect(seq))
        for n in ns:
            if sign < 0:
                agg = max(agg, abs(aggregate_cancellation(seq, n)))
            elif n + seq.k + seq.l - 1 <= hi:
                agg = max(agg, abs(symmetric_reformulation_defect(seq, n)))
    scale = max(K.norm() * e_sq, 1e-300)
    checks.append(Check("eta reflection symmetry", refl / scale, 1e-12))
    checks.append(Check("eta aggregate cancellation" if sign < 0 else "eta symmetric reformulation",
                        agg / scale, 1e-12))
    if sign < 0:
        Xs = symmetrize(X, C, +1)
        checks.append(Check("C X* C = X implies C K* C = -K",
                            check_proposition_forward(Xs, C, U), tol * max(Xs.norm(), 1e-300)))
        for N in opts["y_grid"]:
            _, d = construct_Y(X, U, C, int(N))
            checks.append(Check(f"Y at N={N}: ||YU - UY - K|| <= 4||X||/N",
                                d.commutator_defect, d.commutator_bound))
            checks.append(Check(f"Y at N={N}: C Y* C = Y", d.symmetry_defect, tol * nX))
    return checks


def cmd_verify(args) -> int:
    if args.builtin:
        if args.builtin != "paper-examples":
            raise SpecError(f"unknown verify target {args.builtin!r} (known: paper-examples)")
        report = _report("paper-examples", worked_examples(args.seed or 0))
    else:
        spec = load_spec(args.spec).with_overrides(args.seed, args.tol, args.out)
        try:
            checks = identity_suite(spec)
        except InfeasibleSpec as exc:
            print(f"infeasible operator: {exc}", file=sys.stderr)
            return EXIT_FAIL
        report = _report(str(args.spec), checks)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(text)
    sys.stdout.write(text)
    for c in report["checks"]:
        if not c["passed"]:
            print(f"FAILED: {c['name']} (residual {c['residual']}, bound {c['bound']})",
                  file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# -- converge -----------------------------------------------------------------


def cmd_converge(args) -> int:
    spec = load_spec(args.spec).with_overrides(args.seed, args.tol, args.out)
    try:
        report = run_experiment(spec)
    except InfeasibleSpec as exc:
        print(f"infeasible operator: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out) if args.out else spec.resolve(spec.output_dir)
    files = report.write(out)
    print(f"wrote {len(files)} files to {out} (horizon {report.horizon})")
    return EXIT_OK


# -- fourier ------------------------------------------------------------------


FOURIER_BUILTINS = {
    "uniform8": lambda: make_uniform(8),
    "cantor8": lambda: make_cantor(8),
    "riesz-demo": lambda: make_riesz(RIESZ_DEMO["coeffs"], RIESZ_DEMO["freqs"], RIESZ_DEMO["m"]),
}


def wiener_csv(mu, Ns) -> str:
    lines = ["N,wiener_average,atomic_mass,bound"]
    for N in Ns:
        lines.append(",".join([str(int(N)), wio.fmt(wiener_average(mu, int(N))),
                               wio.fmt(mu.atomic_mass), wio.fmt(wiener_bound(mu, int(N)))]))
    return "\n".join(lines) + "\n"


def _doubling(n_max):
    Ns, N = [], 1
    while N < n_max:
        Ns.append(N)
        N *= 2
    return Ns + [int(n_max)]


def cmd_fourier(args) -> int:
    inputs = {}
    if args.builtin:
        if args.builtin not in FOURIER_BUILTINS:
            raise SpecError(f"unknown measure {args.builtin!r} "
                            f"(known: {', '.join(sorted(FOURIER_BUILTINS))})")
        mu = FOURIER_BUILTINS[args.builtin]()
        opts, out = {}, Path(args.out or "out")
    else:
        spec = load_spec(args.spec).with_overrides(args.seed, args.tol, args.out)
        mu = build_measure(spec)
        inputs = dict(spec.inputs)
        opts = spec.fourier
        out = Path(args.out) if args.out else spec.resolve(spec.output_dir)
    n_max = int(args.n_max or opts.get("n_max", 1024))
    if n_max < 1:
        raise SpecError("--n-max must be positive")
    wn = int(opts.get("wiener_n", n_max))
    out.mkdir(parents=True, exist_ok=True)
    (out / "profile.csv").write_text(wio.profile_to_csv(decay_profile(mu, n_max)))
    (out / "wiener.csv").write_text(wiener_csv(mu, _doubling(wn)))
    manifest = {"measure_hash": mu.content_hash, "measure": mu.label, "n_max": n_max,
                "wiener_n": wn, "inputs": dict(sorted(inputs.items())),
                "tool_version": TOOL_VERSION}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote profile.csv, wiener.csv and manifest.json to {out}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="waveops", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", type=Path, help="experiment spec (TOML)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="override the operator seed")
    common.add_argument("--tol", type=float, help="override tolerances.identity")
    common.add_argument("--builtin", help="built-in target instead of --spec")
    sub.add_parser("verify", parents=[common], help="run the identity suite")
    sub.add_parser("converge", parents=[common], help="run a Cesaro convergence experiment")
    f = sub.add_parser("fourier", parents=[common], help="Fourier profile and Wiener averages")
    f.add_argument("--n-max", type=int, help="largest frequency in the profile")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "converge" and args.builtin:
        parser.error("converge needs --spec")
    if not args.builtin and args.spec is None:
        parser.error(f"{args.command} needs --spec or --builtin")
    handler = {"verify": cmd_verify, "converge": cmd_converge, "fourier": cmd_fourier}
    try:
        return handler[args.command](args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
