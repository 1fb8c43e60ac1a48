"""Counter-based random streams for order-independent frame sampling.

Every draw produced here is a pure function of (seed, stream, purpose,
cell index, round), evaluated with a vectorized Philox 4x32-10 block
cipher.  Because nothing is stateful, a frame sampled in one go is
bit-identical to the same frame sampled in row chunks across worker
threads; the ``--threads`` knob of the CLI is a pure performance knob.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

_MASK32 = np.uint64(0xFFFFFFFF)
_MASK64 = (1 << 64) - 1

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint64(0x9E3779B9)
_PHILOX_W1 = np.uint64(0xBB67AE85)

# Purpose tags keep the Poisson and Gaussian draws of a given cell on
# disjoint counter blocks.
PURPOSE_POISSON = 0x50
PURPOSE_GAUSS = 0x47

# Rejection sampling never needs anywhere near this many rounds; the cap
# exists so a logic error fails loudly instead of spinning.
_MAX_REJECTION_ROUNDS = 4096


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer, used only to spread key bits."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def derive_key(seed: int, stream: int) -> tuple[int, int]:
    """Fold a 64-bit seed and a stream id into one Philox 2x32 key."""
    k = splitmix64(splitmix64(seed) ^ ((stream * 0x9E3779B97F4A7C15 + 1) & _MASK64))
    return k & 0xFFFFFFFF, (k >> 32) & 0xFFFFFFFF


def philox4x32(c0, c1, c2, c3, k0: int, k1: int):
    """Philox 4x32, 10 rounds, vectorized over the counter lanes.

    Inputs are uint64 arrays (or scalars) holding 32-bit words; outputs are
    four uint64 arrays of 32-bit words.
    """
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    shift = np.uint64(32)
    for _ in range(10):
        p0 = c0 * _PHILOX_M0
        p1 = c2 * _PHILOX_M1
        hi0, lo0 = p0 >> shift, p0 & _MASK32
        hi1, lo1 = p1 >> shift, p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = (hi0 ^ c3 ^ k1) & _MASK32
        c3 = lo0
        k0 = (k0 + _PHILOX_W0) & _MASK32
        k1 = (k1 + _PHILOX_W1) & _MASK32
    return c0, c1, c2, c3


def _to_unit(hi, lo):
    # 53 random mantissa bits, offset by half an ulp so u is in (0, 1):
    # log(u) and 1/u stay finite.
    v = (hi << np.uint64(32)) | lo
    return ((v >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


class CounterStream:
    """Keyed family of independent per-cell random draws.

    A "cell" is whatever the caller indexes draws by (a flat pixel index
    for frame sampling).  Each (cell, purpose, round) triple maps to one
    Philox block, so draws for one cell never depend on which other cells
    are evaluated alongside it.
    """

    def __init__(self, seed: int, stream: int):
        self._k0, self._k1 = derive_key(seed, stream)

    def uniform_pair(self, cells, rnd: int, purpose: int):
        """Two independent uniforms in (0, 1) per cell for the given round."""
        cells = np.asarray(cells, dtype=np.uint64)
        c0 = np.full(cells.shape, rnd, dtype=np.uint64)
        c2 = np.full(cells.shape, purpose, dtype=np.uint64)
        c3 = cells >> np.uint64(32)
        x0, x1, x2, x3 = philox4x32(c0, cells & _MASK32, c2, c3, self._k0, self._k1)
        return _to_unit(x0, x1), _to_unit(x2, x3)

    def normal(self, cells):
        """One standard normal per cell (Box-Muller on round 0)."""
        u1, u2 = self.uniform_pair(cells, 0, PURPOSE_GAUSS)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def poisson(self, lam, cells):
        """One Poisson draw per cell with per-cell mean ``lam``.

        Uses CDF inversion below mean 10 and the PTRS transformed-rejection
        sampler above it.  Both consume uniforms strictly from the owning
        cell's counter block, so the result is independent of evaluation
        order and chunking.
        """
        lam = np.asarray(lam, dtype=np.float64)
        cells = np.asarray(cells, dtype=np.uint64)
        if lam.shape != cells.shape:
            raise ValueError("lam and cells must have matching shapes")
        if lam.size and (not np.all(np.isfinite(lam)) or np.any(lam < 0)):
            raise ValueError("Poisson means must be finite and non-negative")
        out = np.zeros(lam.shape, dtype=np.int64)
        flat_lam = lam.ravel()
        flat_cells = cells.ravel()
        flat_out = out.ravel()
        small = (flat_lam > 0) & (flat_lam < 10.0)
        if small.any():
            flat_out[small] = self._poisson_inversion(flat_lam[small], flat_cells[small])
        big = flat_lam >= 10.0
        if big.any():
            flat_out[big] = self._poisson_ptrs(flat_lam[big], flat_cells[big])
        return out

    def _poisson_inversion(self, lam, cells):
        u, _ = self.uniform_pair(cells, 0, PURPOSE_POISSON)
        k = np.zeros(lam.shape, dtype=np.int64)
        p = np.exp(-lam)
        cdf = p.copy()
        active = u > cdf
        n = 0
        while active.any():
            n += 1
            if n > 400:
                raise RuntimeError("Poisson inversion failed to terminate")
            k[active] += 1
            p[active] *= lam[active] / n
            cdf[active] += p[active]
            active[active] = u[active] > cdf[active]
        return k

    def _poisson_ptrs(self, lam, cells):
        # Hoermann's PTRS sampler, valid for lam >= 10.
        b = 0.931 + 2.53 * np.sqrt(lam)
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        v_r = 0.9277 - 3.6224 / (b - 2.0)
        log_lam = np.log(lam)

        k = np.zeros(lam.shape, dtype=np.int64)
        pending = np.arange(lam.size)
        rnd = 0
        while pending.size:
            if rnd >= _MAX_REJECTION_ROUNDS:
                raise RuntimeError("Poisson rejection failed to terminate")
            u, v = self.uniform_pair(cells[pending], rnd, PURPOSE_POISSON)
            rnd += 1
            uu = u - 0.5
            us = 0.5 - np.abs(uu)
            sub_a, sub_b = a[pending], b[pending]
            cand = np.floor((2.0 * sub_a / us + sub_b) * uu + lam[pending] + 0.43)

            fastpath = (us >= 0.07) & (v <= v_r[pending])
            reject = (cand < 0) | ((us < 0.013) & (v > us))
            with np.errstate(divide="ignore", invalid="ignore"):
                lhs = np.log(v * inv_alpha[pending] / (sub_a / (us * us) + sub_b))
                rhs = -lam[pending] + cand * log_lam[pending] - gammaln(cand + 1.0)
                slowpath = ~reject & (lhs <= rhs)
            accept = fastpath | slowpath
            k[pending[accept]] = cand[accept].astype(np.int64)
            pending = pending[~accept]
        return k
