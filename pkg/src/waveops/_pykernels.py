"""NumPy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop for
loop and must agree to rounding.
"""
import numpy as np

# elements of the (count x m) phase block materialised per chunk
_CHUNK = 1 << 20


def frac_turns(ns, turns, nums, den):
    """Fractional part of ``n * theta_j`` for every ``n`` in ``ns``.

    When the angles are rationals ``nums / den`` the reduction is done in
    integer arithmetic, so the result is exact before the final division.
    """
    ns = np.asarray(ns, dtype=np.int64)
    if nums is not None:
        r = np.mod(ns, den).astype(np.uint64)
        prod = np.mod(r[:, None] * nums[None, :], np.uint64(den))
        return prod.astype(np.float64) / float(den)
    x = ns.astype(np.float64)[:, None] * turns[None, :]
    return x - np.floor(x)


def phasor_sums(coef, turns, nums, den, n0, count, sign):
    """out[r, t] = sum_j coef[r, j] * exp(sign * 2*pi*i * (n0 + t) * theta_j)."""
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    m = coef.shape[1]
    out = np.empty((coef.shape[0], count), dtype=np.complex128)
    step = max(1, _CHUNK // max(m, 1))
    for start in range(0, count, step):
        stop = min(count, start + step)
        ns = np.arange(n0 + start, n0 + stop, dtype=np.int64)
        ph = np.exp((sign * 2j * np.pi) * frac_turns(ns, turns, nums, den))
        out[:, start:stop] = coef @ ph.T
    return out
