"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def causal_fir(x: np.ndarray, steady: np.ndarray, warm: list[np.ndarray]) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n, w = len(x), len(steady)
    out = np.empty(n)
    for t in range(min(n, w - 1)):
        out[t] = np.dot(warm[t], x[:t + 1])
    if n >= w:
        out[w - 1:] = sliding_window_view(x, w) @ steady
    return out


def block_match(prev: np.ndarray, nxt: np.ndarray, block: int, radius: int) -> np.ndarray:
    """Best integer displacement per interior block, shape ``[by, bx, 2]`` as (dy, dx).

    Interior blocks are those whose whole search window stays inside the frame.
    Ties in the sum of absolute differences go to the smaller displacement,
    then to the earlier (dy, dx) in scan order.
    """
    prev = np.asarray(prev, dtype=np.float64)
    nxt = np.asarray(nxt, dtype=np.float64)
    h, w = prev.shape
    y0 = np.arange(radius, h - block - radius + 1, block)
    x0 = np.arange(radius, w - block - radius + 1, block)
    by, bx = len(y0), len(x0)
    if by == 0 or bx == 0:
        raise ValueError("frame too small for the block size and search radius")
    top, left = y0[0], x0[0]
    hh, ww = by * block, bx * block
    ref = prev[top:top + hh, left:left + ww]
    best = np.full((by, bx), np.inf)
    best_r2 = np.full((by, bx), np.inf)
    disp = np.zeros((by, bx, 2))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            cand = nxt[top + dy:top + dy + hh, left + dx:left + dx + ww]
            sad = np.abs(ref - cand).reshape(by, block, bx, block).sum(axis=(1, 3))
            r2 = dy * dy + dx * dx
            better = (sad < best) | ((sad == best) & (r2 < best_r2))
            best = np.where(better, sad, best)
            best_r2 = np.where(better, r2, best_r2)
            disp[better] = (dy, dx)
    return disp
