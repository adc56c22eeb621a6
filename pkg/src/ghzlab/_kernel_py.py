"""Numpy implementation of the trial kernel, used when the extension is absent.

Same counter-based stream as ``_speedups``: trial ``i`` gets the key
``mix64(key + GOLDEN*(i+1))`` and its ``k``-th uniform is the top 53 bits
of ``mix64(trial_key + GOLDEN*(k+1))``.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _trial_keys(key: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start + 1, stop + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) + GOLDEN * idx)


def _uniforms(trial_keys: np.ndarray, k: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = mix64(trial_keys + GOLDEN * np.uint64(k + 1))
    return (z >> np.uint64(11)).astype(np.float64) * _TWO_M53


def trial_uniforms(key: int, index: int, count: int) -> list[float]:
    tk = _trial_keys(key, index, index + 1)
    return [float(_uniforms(tk, k)[0]) for k in range(count)]


def run_block(key, start, stop, q_cum, a_cum, win, detected, out_q=None, out_a=None,
              chunk: int = 1 << 18):
    """Play trials ``start..stop-1``; returns ``(wins, trials_with_nodetect)``."""
    wins = nodetect = 0
    for lo in range(start, stop, chunk):
        hi = min(stop, lo + chunk)
        tk = _trial_keys(key, lo, hi)
        u0 = _uniforms(tk, 0)
        u1 = _uniforms(tk, 1)
        qi = np.searchsorted(q_cum, u0, side="right")
        ai = (a_cum[qi] <= u1[:, None]).sum(axis=1)
        det = detected[ai].astype(bool)
        nodetect += int((~det).sum())
        wins += int((det & win[qi, ai].astype(bool)).sum())
        if out_q is not None:
            out_q[lo - start:hi - start] = qi
            out_a[lo - start:hi - start] = ai
    return wins, nodetect
