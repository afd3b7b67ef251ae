"""Counter-based random streams.

Every draw is a pure function of ``(master_seed, stream_id, block)`` through
the Philox4x32-10 bijection (Salmon et al., SC'11), so a stream can be
created for any replication index in O(1) and replaying a
``(master_seed, stream_id)`` pair reproduces its sequence bit for bit.

Layout of one counter block
    key     = (seed & 0xffffffff, seed >> 32)
    counter = (block & 0xffffffff, block >> 32, stream & 0xffffffff, stream >> 32)
    output  = four 32-bit words, read as two 64-bit words ``wa = x0 | x1 << 32``
              and ``wb = x2 | x3 << 32``; a word maps to the open unit
              interval as ``((w >> 11) + 0.5) * 2**-53``.

Draw rules (each consumes whole blocks, in this order)
    normal       one block, Box-Muller cosine branch
                 ``sqrt(-2 log ua) * cos(2 pi ub)``
    uniform      one block, ``ua``
    chi_square   df <= 30: ``df // 2`` blocks, each contributing the exact
                 squared norm ``-2 log ua`` of a Box-Muller pair, then one
                 normal squared if df is odd.
                 df > 30: ``2 * Gamma(df / 2)`` via Marsaglia-Tsang, each trial
                 one normal block and one uniform block.
    wishart      Bartlett factor row by row; within row ``i`` first the
                 ``i`` below-diagonal normals, then ``sqrt(chi_square(df - i))``.

The compiled kernels in :mod:`mclr._core` implement exactly these rules.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidDf

MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
TWO_PI = 2.0 * np.pi
CHI2_SUM_CUTOFF = 30
SEED_TAG_STREAM = 0xFFFFFFFF


def as_u64(value):
    """Reduce an integer (possibly negative) to its unsigned 64-bit form."""
    return int(value) & 0xFFFFFFFFFFFFFFFF


def philox4x32(c0, c1, c2, c3, k0, k1, rounds=10):
    """Vectorised Philox4x32 on ``uint64`` arrays holding 32-bit lanes."""
    c0, c1, c2, c3, k0, k1 = (np.asarray(x, dtype=np.uint64) for x in (c0, c1, c2, c3, k0, k1))
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> _S32) ^ c1 ^ k0, p1 & MASK32, (p0 >> _S32) ^ c3 ^ k1, p0 & MASK32
        k0 = (k0 + _W0) & MASK32
        k1 = (k1 + _W1) & MASK32
    return c0, c1, c2, c3


def _to_unit(word):
    return ((word >> _S11).astype(np.float64) + 0.5) * 2.0**-53


def blocks(seed, stream, block):
    """Two open-interval uniforms per block for arrays of streams/blocks."""
    seed = as_u64(seed)
    stream = np.asarray(stream, dtype=np.uint64)
    block = np.asarray(block, dtype=np.uint64)
    x0, x1, x2, x3 = philox4x32(
        block & MASK32, block >> _S32, stream & MASK32, stream >> _S32,
        np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32),
    )
    return _to_unit(x0 | (x1 << _S32)), _to_unit(x2 | (x3 << _S32))


def derive_seed(master_seed, tag, index):
    """
    Child seed for ``(tag, index)`` under ``master_seed``.

    Uses the counter lane reserved by ``stream >> 32 == 0xffffffff`` so
    derived seeds never collide with a draw of an ordinary stream.
    """
    seed = as_u64(master_seed)
    index = as_u64(index)
    x0, x1, _, _ = philox4x32(
        index & 0xFFFFFFFF, index >> 32, int(tag) & 0xFFFFFFFF, SEED_TAG_STREAM,
        seed & 0xFFFFFFFF, seed >> 32,
    )
    return int(x0) | (int(x1) << 32)


class StreamBatch:
    """
    A vector of independent streams advanced in lock step.

    Streams that need a different number of blocks (gamma rejection) keep
    their own counters, so each lane reproduces the scalar stream exactly.
    """

    def __init__(self, master_seed, stream_ids, start_block=0):
        self.master_seed = as_u64(master_seed)
        self.stream_ids = np.asarray(stream_ids, dtype=np.uint64)
        self.counter = np.full(self.stream_ids.shape, start_block, dtype=np.uint64)

    def __len__(self):
        return self.stream_ids.shape[0]

    def _next(self, mask=None):
        if mask is None:
            ua, ub = blocks(self.master_seed, self.stream_ids, self.counter)
            self.counter += np.uint64(1)
            return ua, ub
        ua, ub = blocks(self.master_seed, self.stream_ids[mask], self.counter[mask])
        self.counter[mask] += np.uint64(1)
        return ua, ub

    def normal(self, mask=None):
        ua, ub = self._next(mask)
        return np.sqrt(-2.0 * np.log(ua)) * np.cos(TWO_PI * ub)

    def uniform(self, mask=None):
        return self._next(mask)[0]

    def chi_square(self, df):
        df = int(df)
        if df < 1:
            raise InvalidDf(f"chi-square degrees of freedom must be >= 1, got {df}.")
        if df <= CHI2_SUM_CUTOFF:
            prod = np.ones(len(self))
            for _ in range(df // 2):
                prod *= self._next()[0]
            out = -2.0 * np.log(prod)
            if df % 2:
                out += self.normal() ** 2
            return out
        return 2.0 * self._gamma(0.5 * df)

    def _gamma(self, shape):
        # Marsaglia & Tsang (2000), shape >= 1
        d = shape - 1.0 / 3.0
        c = 1.0 / np.sqrt(9.0 * d)
        out = np.empty(len(self))
        pending = np.ones(len(self), dtype=bool)
        while pending.any():
            idx = np.flatnonzero(pending)
            x = self.normal(pending)
            u = self.uniform(pending)
            v = 1.0 + c * x
            ok = v > 0.0
            v3 = np.where(ok, v * v * v, 1.0)
            accept = ok & (np.log(u) < 0.5 * x * x + d - d * v3 + d * np.log(v3))
            out[idx[accept]] = d * v3[accept]
            pending[idx[accept]] = False
        return out

    def wishart_identity(self, df, dim):
        """Bartlett draws, shape ``(len(self), dim, dim)``."""
        df, dim = int(df), int(dim)
        if dim < 1 or df < dim:
            raise InvalidDf(f"Wishart needs df >= dim >= 1, got df={df}, dim={dim}.")
        A = np.zeros((len(self), dim, dim))
        for i in range(dim):
            for j in range(i):
                A[:, i, j] = self.normal()
            A[:, i, i] = np.sqrt(self.chi_square(df - i))
        return A @ np.swapaxes(A, 1, 2)


@dataclass(frozen=True)
class WishartDraw:
    dim: int
    df: int
    matrix: np.ndarray


@dataclass
class SeededStream:
    """
    One reproducible stream identified by ``(master_seed, stream_id)``.

    Scalar draws follow the module-level draw rules; ``normals`` fills a
    vector from consecutive blocks and is the fast path for data generation.
    """

    master_seed: int
    stream_id: int = 0
    block: int = field(default=0, repr=False)

    def __post_init__(self):
        self.master_seed = as_u64(self.master_seed)
        self.stream_id = as_u64(self.stream_id)

    def _batch(self):
        return StreamBatch(self.master_seed, [self.stream_id], self.block)

    def _run(self, method, *args):
        batch = self._batch()
        out = getattr(batch, method)(*args)
        self.block = int(batch.counter[0])
        return out[0]

    def normal(self):
        return float(self._run("normal"))

    def uniform(self):
        return float(self._run("uniform"))

    def chi_square(self, df):
        return float(self._run("chi_square", df))

    def wishart_identity(self, df, dim):
        return WishartDraw(dim=int(dim), df=int(df), matrix=self._run("wishart_identity", df, dim))

    def normals(self, size):
        """``size`` standard normals from consecutive blocks."""
        count = int(np.prod(size))
        block = self.block + np.arange(count, dtype=np.uint64)
        ua, ub = blocks(self.master_seed, np.full(count, self.stream_id, dtype=np.uint64), block)
        self.block += count
        return (np.sqrt(-2.0 * np.log(ua)) * np.cos(TWO_PI * ub)).reshape(size)
