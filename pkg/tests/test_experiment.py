import json

import numpy as np
import pytest

from waveops import io as wio
from waveops.experiment import (ExperimentSpec, InfeasibleSpec, SpecError, build_commutator,
                                build_measure, build_vectors, cauchy_tail, decay_ratio,
                                load_spec, parse_spec, propagated_pairings, run_experiment,
                                spec_digest)
from waveops.hilbert import inner, multiplication_unitary
from waveops.measure import make_cantor
from waveops.symmetry import ANTISYMMETRIC, check_kernel_condition
from waveops.wave import commutator, propagate

BASE = """
n_grid = [16, 32, 64, 128, 256]
[measure]
kind = "cantor"
level = 4
[operator]
kind = "rank_two"
seed = 3
[vectors]
family = "monomial"
k_range = [-1, 1]
"""


def test_parse_defaults():
    s = parse_spec('[measure]\nkind = "uniform"\nm = 8\n')
    assert s.n_grid == [2**p for p in range(4, 13)]
    assert s.vectors["k_range"] == [-4, 4]
    assert s.tolerances == {"identity": 1e-10, "condition": 1e-10}


@pytest.mark.parametrize("text,match", [
    ("n_grid = [1,2]\n", "measure"),
    ('bogus = 1\n[measure]\nkind="uniform"\nm=4\n', "unknown key"),
    ('[measure]\nkind="uniform"\nm=4\ncolour=1\n', "colour"),
    ('[measure]\nkind="sphere"\n', "measure.kind"),
    ('[measure]\nkind="cantor"\n', "level"),
    ('n_grid=[]\n[measure]\nkind="uniform"\nm=4\n', "empty"),
    ('n_grid=[4,4]\n[measure]\nkind="uniform"\nm=4\n', "increasing"),
    ('n_grid=[4,"x"]\n[measure]\nkind="uniform"\nm=4\n', "integers"),
    ('[measure]\nkind="uniform"\nm=4\n[operator]\nkind="random_kernel"\n', "seed"),
    ('[measure]\nkind="uniform"\nm=4\n[operator]\nkind="rank_two"\n', "seed"),
    ('[measure]\nkind="uniform"\nm=4\n[operator]\nkind="rank_two"\nexponents=[1,2]\n', "four"),
    ('[measure]\nkind="uniform"\nm=4\n[vectors]\nfamily="odd"\n', "family"),
    ('[measure]\nkind="uniform"\nm=4\n[tolerances]\nidentity=-1\n', "positive"),
    ('[measure\n', "spec"),
    ('measure = 3\n', "table"),
])
def test_parse_errors(text, match):
    with pytest.raises(SpecError, match=match):
        parse_spec(text)


def test_missing_files_named(tmp_path):
    text = '[measure]\nkind="file"\npath="nowhere.txt"\n'
    with pytest.raises(SpecError, match="nowhere.txt"):
        parse_spec(text, tmp_path)
    with pytest.raises(SpecError, match="spec file not found"):
        load_spec(tmp_path / "missing.toml")


def test_overrides():
    s = parse_spec(BASE).with_overrides(seed=9, tol=1e-6, out="o")
    assert s.operator["seed"] == 9 and s.tolerances["identity"] == 1e-6 and s.output_dir == "o"
    assert parse_spec(BASE).operator["seed"] == 3


def test_file_measure_and_kernel(tmp_path):
    mu = make_cantor(3)
    wio.save_measure(mu, tmp_path / "mu.txt")
    k = build_commutator(parse_spec(BASE.replace("level = 4", "level = 3")), mu).kernel
    (tmp_path / "k.csv").write_text(wio.kernel_to_csv(k))
    text = ('[measure]\nkind="file"\npath="mu.txt"\nnormalize=false\n'
            '[operator]\nkind="kernel_file"\npath="k.csv"\nsymmetry="antisymmetric"\n')
    (tmp_path / "s.toml").write_text(text)
    spec = load_spec(tmp_path / "s.toml")
    mu2 = build_measure(spec)
    comm = build_commutator(spec, mu2)
    np.testing.assert_array_equal(comm.kernel.values, k.values)
    assert len(spec.inputs) == 3  # spec, measure and kernel hashes


def test_rank_two_exponents():
    spec = parse_spec(BASE.replace('seed = 3', 'exponents = [2, 1, 0, 3]'))
    mu = build_measure(spec)
    comm = build_commutator(spec, mu)
    assert comm.symmetry == ANTISYMMETRIC
    assert check_kernel_condition(comm.kernel, comm.gamma, ANTISYMMETRIC, 1e-12).passed
    with pytest.raises(InfeasibleSpec):
        build_commutator(parse_spec(BASE.replace('seed = 3', 'exponents = [2, 1, 0, 4]')), mu)


def test_identification_matches_kernel():
    spec = parse_spec(BASE)
    mu = build_measure(spec)
    comm = build_commutator(spec, mu)
    K = commutator(comm.X, multiplication_unitary(mu)).to_kernel()
    np.testing.assert_allclose(K.values, comm.kernel.values, atol=1e-12)


def test_monomial_vectors():
    spec = parse_spec(BASE)
    mu = build_measure(spec)
    pairs = build_vectors(spec, mu)
    assert [p[0] for p in pairs][:3] == ["k-1_l-1", "k-1_l0", "k-1_l1"]
    assert len(pairs) == 9


def test_vectors_file(tmp_path):
    mu = make_cantor(4)
    rows = ["pair,role,i,re,im"]
    for i in range(mu.size):
        rows += [f"a,h1,{i},1,0", f"a,h2,{i},0,{i}"]
    (tmp_path / "v.csv").write_text("\n".join(rows) + "\n")
    text = BASE.replace('family = "monomial"\nk_range = [-1, 1]', 'family = "file"\npath = "v.csv"')
    spec = parse_spec(text, tmp_path)
    pairs = build_vectors(spec, build_measure(spec))
    assert len(pairs) == 1 and pairs[0][2].values[3] == 3j


def test_propagated_pairings_against_direct():
    spec = parse_spec(BASE)
    mu = build_measure(spec)
    comm = build_commutator(spec, mu)
    pairs = build_vectors(spec, mu)[:3]
    fwd, bwd = propagated_pairings(comm.X, pairs, 40)
    U = multiplication_unitary(mu)
    for a, (_, h1, h2) in enumerate(pairs):
        for n in (0, 1, 17, 39):
            assert fwd[a, n] == pytest.approx(inner(propagate(U, comm.X, n) @ h1, h2), abs=1e-12)
            assert bwd[a, n] == pytest.approx(inner(propagate(U, comm.X, -n) @ h1, h2), abs=1e-12)


def test_run_experiment_and_write(tmp_path):
    spec = parse_spec(BASE)
    rep = run_experiment(spec)
    assert rep.horizon == make_cantor(4).horizon
    assert len(rep.traces) == 9
    t = rep.trace("k0_l0")
    assert t.cesaro_diff.shape == (5,)
    with pytest.raises(KeyError):
        rep.trace("nope")
    files = rep.write(tmp_path)
    assert len(files) == 10
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert set(man) >= {"measure_hash", "spec", "horizon", "fits", "tool_version"}
    assert man["measure_hash"] == make_cantor(4).content_hash
    head = (tmp_path / "trace_k0_l0.csv").read_text().splitlines()[0]
    assert head == "N,cesaro_diff_re,cesaro_diff_im,cesaro_sum_re,cesaro_sum_im,raw_re,raw_im"


def test_fit_needs_five_points_below_horizon():
    text = BASE.replace("n_grid = [16, 32, 64, 128, 256]", "n_grid = [16, 32, 64, 128, 256, 4096]")
    rep = run_experiment(parse_spec(text))
    assert rep.beyond_horizon.tolist() == [False] * 5 + [True]
    assert all(f is None or f["points"] == 5 for f in rep.fits.values())
    rep = run_experiment(parse_spec(BASE.replace("[16, 32, 64, 128, 256]", "[16, 32, 64]")))
    assert all(f is None for f in rep.fits.values())


def test_summaries():
    rep = run_experiment(parse_spec(BASE))
    r = decay_ratio(rep, 16, 256)
    assert set(r) == {t.label for t in rep.traces}
    fam, own = cauchy_tail(rep, 256), cauchy_tail(rep, 256, scale="trace")
    assert all(fam[k] <= own[k] + 1e-15 for k in fam)


def test_spec_digest_stable():
    assert spec_digest(parse_spec(BASE)) == spec_digest(parse_spec(BASE))
    assert spec_digest(parse_spec(BASE)) != spec_digest(parse_spec(BASE.replace("seed = 3", "seed = 4")))


def test_spec_dataclass_roundtrip():
    s = ExperimentSpec(measure={"kind": "uniform", "m": 4})
    assert s.as_dict()["measure"]["m"] == 4
    assert s.resolve("/abs/path").as_posix() == "/abs/path"
