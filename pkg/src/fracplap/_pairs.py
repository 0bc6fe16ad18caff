"""Blocked pair sums over grid nodes with a thread-count independent result.

Rows are cut into blocks of a fixed size; every block yields per-row partial
sums which are concatenated in row order and reduced with numpy's pairwise
summation. The partition never depends on the worker count, so the bits of
the result do not either.
"""
from __future__ import annotations

import contextlib
import functools
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .grid import Grid

ROW_BLOCK = 128
_threads = 1


def get_threads() -> int:
    return _threads


def set_threads(k: int) -> None:
    global _threads
    if k < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(k)


@contextlib.contextmanager
def threads(k: int):
    old = _threads
    set_threads(k)
    try:
        yield
    finally:
        set_threads(old)


@functools.lru_cache(maxsize=32)
def distance_table(grid: Grid) -> np.ndarray:
    """Torus distance from node 0 to every node, shape ``grid.shape``."""
    n = grid.n_points
    m = np.arange(n)
    one = grid.h * np.minimum(m, n - m).astype(float)
    if grid.dim == 1:
        table = one
    else:
        table = np.sqrt(one[:, None] ** 2 + one[None, :] ** 2)
    table.setflags(write=False)
    return table


def torus_distance(x, y, box_length: float) -> np.ndarray:
    """Distance on the flat torus between point arrays of shape ``(..., dim)``."""
    delta = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % box_length
    delta = np.minimum(delta, box_length - delta)
    return np.sqrt(np.sum(delta * delta, axis=-1))


def multi_index(grid: Grid, flat_idx: np.ndarray) -> np.ndarray:
    return np.stack(np.unravel_index(flat_idx, grid.shape), axis=-1)


def distances(grid: Grid, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Torus distances between flat node indices ``rows`` x ``cols``."""
    table = distance_table(grid)
    n = grid.n_points
    if grid.dim == 1:
        return table[(rows[:, None] - cols[None, :]) % n]
    ri, ci = multi_index(grid, rows), multi_index(grid, cols)
    d0 = (ri[:, None, 0] - ci[None, :, 0]) % n
    d1 = (ri[:, None, 1] - ci[None, :, 1]) % n
    return table[d0, d1]


def kernel_block(grid: Grid, rows: np.ndarray, cols: np.ndarray, exponent: float) -> np.ndarray:
    """``d^-exponent`` for the block, zero where the distance vanishes (diagonal)."""
    d = distances(grid, rows, cols)
    d = np.where(d > 0, d, np.inf)
    return d ** (-exponent)


def _blocks(n_rows: int):
    return [(a, min(a + ROW_BLOCK, n_rows)) for a in range(0, n_rows, ROW_BLOCK)]


def row_sums(rows: np.ndarray, cols: np.ndarray, block_fn) -> np.ndarray:
    """Per-row sums of ``block_fn(row_indices, col_indices) -> 2d array``."""
    rows = np.asarray(rows)
    cols = np.asarray(cols)

    def work(span):
        a, b = span
        r = rows[a:b]
        return np.sum(block_fn(r, cols), axis=1)

    spans = _blocks(len(rows))
    if _threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=_threads) as pool:
            parts = list(pool.map(work, spans))
    else:
        parts = [work(sp) for sp in spans]
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def pair_sum(rows: np.ndarray, cols: np.ndarray, block_fn) -> float:
    return float(np.sum(row_sums(rows, cols, block_fn)))


def node_indices(mask: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.asarray(mask).reshape(-1))
