"""Pure numpy/stdlib versions of the compiled kernels."""

import math

import numpy as np

_BLOCK = 256


def pair_bucket_max(values, index, qtab, offsets, sizes, nbuckets):
    values = np.asarray(values, dtype=float)
    m, nf = index.shape
    out = np.full(nbuckets, -1.0)
    if m == 0:
        return out
    out[0] = 0.0
    tables = [
        qtab[offsets[k]:offsets[k] + sizes[k] * sizes[k]].reshape(sizes[k], sizes[k])
        for k in range(nf)
    ]
    for start in range(0, m, _BLOCK):
        stop = min(start + _BLOCK, m)
        rows = np.arange(start, stop)
        diff = np.abs(values[rows, None] - values[None, :])
        bucket = np.zeros((stop - start, m), dtype=np.int64)
        for k in range(nf):
            bucket += tables[k][index[rows, k][:, None], index[None, :, k]]
        # keep pairs a < c only, as in the compiled loop
        keep = rows[:, None] < np.arange(m)[None, :]
        np.maximum.at(out, bucket[keep], diff[keep])
    return out


def axis_bucket_max(slab, q, nbuckets):
    slab = np.asarray(slab, dtype=float)
    n = slab.shape[0]
    out = np.full(nbuckets, -1.0)
    if n == 0:
        return out
    out[0] = 0.0
    for a in range(n):
        if a + 1 == n:
            break
        best = np.abs(slab[a + 1:] - slab[a]).max(axis=1) if slab.shape[1] else np.zeros(n - a - 1)
        np.maximum.at(out, q[a, a + 1:], best)
    return out


def compensated_marginals(values, shape, weights, woff):
    shape = [int(s) for s in shape]
    nf = len(shape)
    tensor = np.asarray(values, dtype=float).reshape(shape)
    ws = [np.asarray(weights[woff[k]:woff[k] + shape[k]]) for k in range(nf)]
    result = []
    for j in range(nf):
        weighted = tensor
        for k in range(nf):
            if k != j:
                bshape = [1] * nf
                bshape[k] = shape[k]
                weighted = weighted * ws[k].reshape(bshape)
        rows = np.moveaxis(weighted, j, 0).reshape(shape[j], -1)
        result.append(np.array([math.fsum(row) for row in rows]))
    return result
