"""Text formats for measures, kernels, operators and Fourier profiles."""
from __future__ import annotations

import csv
import hashlib
import io
import re
from pathlib import Path

import numpy as np

from waveops.hilbert import Kernel, OperatorMatrix
from waveops.measure import DiscreteMeasure, FourierProfile

MEASURE_HEADER = "# waveops-measure v1 label="
_KERNEL_HEADER = re.compile(r"^# waveops-(kernel|operator) v1 measure_sha256=([0-9a-f]{64})(?: tag=(.*))?$")


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(x), ".17g")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def measure_to_text(mu: DiscreteMeasure) -> str:
    lines = [MEASURE_HEADER + mu.label]
    lines += [f"{fmt(t)}\t{fmt(w)}" for t, w in zip(mu.thetas, mu.weights)]
    return "\n".join(lines) + "\n"


def measure_from_text(text: str) -> DiscreteMeasure:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MEASURE_HEADER):
        raise ValueError("missing '# waveops-measure v1' header")
    label = lines[0][len(MEASURE_HEADER):]
    th, w = [], []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {no}: expected 'theta<TAB>weight'")
        th.append(float(parts[0]))
        w.append(float(parts[1]))
    return DiscreteMeasure(np.array(th), np.array(w), label)


def save_measure(mu: DiscreteMeasure, path) -> None:
    Path(path).write_text(measure_to_text(mu))


def load_measure(path) -> DiscreteMeasure:
    return measure_from_text(Path(path).read_text())


def _matrix_to_csv(kind, mu, values, tag=None) -> str:
    buf = io.StringIO()
    head = f"# waveops-{kind} v1 measure_sha256={mu.content_hash}"
    if tag:
        head += f" tag={tag}"
    buf.write(head + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "re", "im"])
    for (i, j), v in np.ndenumerate(values):
        w.writerow([i, j, fmt(v.real), fmt(v.imag)])
    return buf.getvalue()


def _matrix_from_csv(text, mu, expect):
    lines = text.splitlines()
    m = _KERNEL_HEADER.match(lines[0]) if lines else None
    if m is None or m.group(1) != expect:
        raise ValueError(f"missing '# waveops-{expect} v1' header")
    if m.group(2) != mu.content_hash:
        raise ValueError(f"{expect} file is bound to a different measure ({m.group(2)[:12]}...)")
    vals = np.zeros((mu.size, mu.size), dtype=np.complex128)
    seen = np.zeros(vals.shape, dtype=bool)
    rows = csv.reader(lines[1:])
    if next(rows, None) != ["i", "j", "re", "im"]:
        raise ValueError("expected column header i,j,re,im")
    for row in rows:
        i, j = int(row[0]), int(row[1])
        vals[i, j] = complex(float(row[2]), float(row[3]))
        seen[i, j] = True
    if not seen.all():
        raise ValueError(f"{expect} file is missing {int((~seen).sum())} entries")
    return vals, m.group(3) or ""


def kernel_to_csv(k: Kernel) -> str:
    return _matrix_to_csv("kernel", k.measure, k.values)


def kernel_from_csv(text: str, mu: DiscreteMeasure) -> Kernel:
    vals, _ = _matrix_from_csv(text, mu, "kernel")
    return Kernel(mu, vals)


def operator_to_csv(T: OperatorMatrix) -> str:
    return _matrix_to_csv("operator", T.measure, T.entries, T.tag)


def operator_from_csv(text: str, mu: DiscreteMeasure) -> OperatorMatrix:
    vals, tag = _matrix_from_csv(text, mu, "operator")
    return OperatorMatrix(mu, vals, tag)


def profile_to_csv(p: FourierProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "re", "im", "abs", "cesaro_abs"])
    for n, v, c in zip(p.ns, p.values, p.cesaro_abs):
        w.writerow([int(n), fmt(v.real), fmt(v.imag), fmt(abs(v)), fmt(c)])
    return buf.getvalue()


def profile_from_csv(text: str) -> FourierProfile:
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != ["n", "re", "im", "abs", "cesaro_abs"]:
        raise ValueError("unexpected profile header")
    body = rows[1:]
    ns = [int(r[0]) for r in body]
    vals = np.array([complex(float(r[1]), float(r[2])) for r in body])
    ces = np.array([float(r[4]) for r in body])
    return FourierProfile(ns[0], vals, ces)
