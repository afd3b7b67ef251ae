"""Pure numpy implementation of the compiled kernels (same signatures, same draws)."""

import numpy as np

from ..rng import StreamBatch, SeededStream


def draw_components(seed, start, count, n, k):
    batch = StreamBatch(seed, np.arange(start, start + count, dtype=np.uint64))
    z = batch.normal()
    r = batch.chi_square(k - 1) if k > 1 else np.zeros(count)
    a00 = np.sqrt(batch.chi_square(n - k))
    a10 = batch.normal()
    a11 = np.sqrt(batch.chi_square(n - k - 1))
    return z, r, a00 * a00, a00 * a10, a10 * a10 + a11 * a11


def stream_normals(seed, stream, start_block, count):
    return SeededStream(seed, stream, start_block).normals(count)
