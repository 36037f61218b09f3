"""Numba-compiled inner loops for candidate scoring.

The accumulation order inside a candidate is part of the module contract:
filled offsets in raster order, channels innermost, one sequential float64
accumulator.  The exhaustive verification oracle follows the same order, so
fast path and oracle agree bit-for-bit and threshold comparisons cannot
diverge.  Candidates are independent, which keeps results identical for any
worker count.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def score_windows(padded, valid, rows, cols, offs, qvals, gw, half):
    """Masked, Gaussian-weighted, normalized SSD for a grid of candidate centers.

    padded : (S, H+2h, W+2h, Ch) float64, pixel values / 255, zero outside bounds
    valid  : (H+2h, W+2h) uint8, 1 inside the original image bounds
    rows, cols : candidate center coordinates (unpadded)
    offs   : (M, 2) filled query offsets relative to the center, raster order
    qvals  : (M, Ch) float64 query values / 255
    gw     : (M,) float64 Gaussian weights at those offsets

    Returns (S, len(rows), len(cols)) float64; inf marks an empty joint mask.
    """
    S = padded.shape[0]
    ch = padded.shape[3]
    nr = rows.shape[0]
    nc = cols.shape[0]
    m_count = offs.shape[0]
    out = np.full((S, nr, nc), np.inf)
    for s in prange(S):
        for a in range(nr):
            r = rows[a]
            for b in range(nc):
                c = cols[b]
                acc = 0.0
                ws = 0.0
                for m in range(m_count):
                    rp = r + half + offs[m, 0]
                    cp = c + half + offs[m, 1]
                    if valid[rp, cp]:
                        d2 = 0.0
                        for k in range(ch):
                            diff = qvals[m, k] - padded[s, rp, cp, k]
                            d2 += diff * diff
                        acc += gw[m] * d2
                        ws += gw[m]
                if ws > 0.0:
                    out[s, a, b] = acc / ws
    return out


@njit(cache=True)
def seq_l2(vectors, z):
    """Euclidean distances with sequential per-row accumulation over dimensions."""
    s_count, dim = vectors.shape
    out = np.empty(s_count)
    for s in range(s_count):
        acc = 0.0
        for d in range(dim):
            diff = vectors[s, d] - z[d]
            acc += diff * diff
        out[s] = np.sqrt(acc)
    return out
