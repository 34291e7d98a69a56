"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``WAVEOPS_BACKEND=python``
to force the NumPy versions.  Both backends expose ``frac_turns`` and
``phasor_sums`` with identical signatures.
"""
import os

from waveops import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("WAVEOPS_BACKEND", "").lower() != "python":
    try:
        from waveops import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels

# below this many coefficient rows the per-atom recurrence beats a BLAS product
_ROW_CUTOFF = 4


def available_backends():
    out = ["python"]
    try:
        from waveops import _ckernels  # noqa: F401

        out.append("compiled")
    except ImportError:  # pragma: no cover
        pass
    return out


def get_backend(name):
    if name == "python":
        return _pykernels
    if name == "compiled":
        from waveops import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def frac_turns(ns, turns, nums, den):
    return _impl.frac_turns(ns, turns, nums, den)


def phasor_sums(coef, turns, nums, den, n0, count, sign=1):
    """Sum ``coef[r, j] * exp(sign*2*pi*i*n*theta_j)`` over atoms for ``n = n0 .. n0+count-1``."""
    if coef.shape[0] > _ROW_CUTOFF:
        return _pykernels.phasor_sums(coef, turns, nums, den, n0, count, sign)
    return _impl.phasor_sums(coef, turns, nums, den, n0, count, sign)
