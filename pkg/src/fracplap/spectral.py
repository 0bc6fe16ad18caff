"""Fourier multipliers on the torus: Lambda^t, Riesz potentials, Littlewood-Paley pieces.

Convention: ``frac_laplacian(f, t)`` has symbol |xi|^t with xi = 2 pi k / L,
so the operator written (-Delta)^s elsewhere is ``frac_laplacian(f, 2 s)``.
Every homogeneous multiplier sends the zero mode to zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _pairs
from .grid import Grid, SampledFunction, smooth_step

log = logging.getLogger(__name__)


def frequency_magnitude(grid: Grid) -> np.ndarray:
    """|xi| on the rfftn layout of ``grid``."""
    n, L = grid.n_points, grid.box_length
    full = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
    half = 2 * np.pi * np.fft.rfftfreq(n, d=L / n)
    if grid.dim == 1:
        return np.abs(half)
    return np.sqrt(full[:, None] ** 2 + half[None, :] ** 2)


def _axes(shape) -> tuple[int, ...]:
    return tuple(range(len(shape)))


def apply_multiplier(f: SampledFunction, symbol: np.ndarray) -> SampledFunction:
    F = np.fft.rfftn(f.values)
    out = np.fft.irfftn(F * symbol, s=f.grid.shape, axes=_axes(f.grid.shape))
    return SampledFunction(f.grid, out)


def _power_symbol(grid: Grid, t: float) -> np.ndarray:
    xi = frequency_magnitude(grid)
    sym = np.zeros_like(xi)
    nz = xi > 0
    sym[nz] = xi[nz] ** t
    return sym


def frac_laplacian(f: SampledFunction, t: float) -> SampledFunction:
    """Lambda^t f = F^-1(|xi|^t F f); the mean is annihilated."""
    if not 0 < t <= 2:
        raise ValueError(f"order t must lie in (0, 2], got {t}")
    return apply_multiplier(f, _power_symbol(f.grid, t))


def riesz_potential(g: SampledFunction, t: float) -> SampledFunction:
    """Lambda^{-t} g = F^-1(|xi|^{-t} F g) for zero-mean ``g``.

    A nonzero mean is removed first (and logged), since the symbol is
    singular at xi = 0. On the torus the multiplier makes sense for every
    t > 0; orders up to 2 are accepted, matching ``frac_laplacian``. Only the
    real-space kernel needs t < dim.
    """
    if not 0 < t <= 2:
        raise ValueError(f"Riesz order t must lie in (0, 2], got {t}")
    mean = float(np.mean(g.values))
    if mean != 0.0:
        log.debug("riesz_potential: removed mean %.3e", mean)
    return apply_multiplier(g, _power_symbol(g.grid, -t))


def riesz_constant(dim: int, t: float) -> float:
    """c(n, t) with Lambda^{-t} g = c(n, t) int |x-z|^{t-n} g(z) dz on R^n."""
    return math.gamma((dim - t) / 2) / (2 ** t * math.pi ** (dim / 2) * math.gamma(t / 2))


def _self_cell_integral(grid: Grid, t: float) -> float:
    """int over the cell centred at 0 of |z|^{t-n} dz."""
    h = grid.h
    if grid.dim == 1:
        return 2 * (h / 2) ** t / t
    # square [-h/2, h/2]^2 in polar form: 8 * int_0^{pi/4} (h / (2 cos a))^t / t da
    a = np.linspace(0, np.pi / 4, 2001)
    vals = (h / (2 * np.cos(a))) ** t / t
    return 8 * float(np.trapezoid(vals, a))


def riesz_potential_realspace(g: SampledFunction, t: float, self_cell: bool = True) -> SampledFunction:
    """c(n,t) sum_z d(x,z)^{t-n} g(z) h^n with the nearest-image torus distance.

    The diagonal term is replaced by the exact cell integral of the kernel
    (``self_cell=True``) or dropped.
    """
    grid = g.grid
    if not 0 < t < grid.dim:
        raise ValueError(f"Riesz order t must lie in (0, {grid.dim}), got {t}")
    vals = g.flat - float(np.mean(g.values))
    idx = np.arange(grid.size)

    def block(r, c):
        return _pairs.kernel_block(grid, r, c, grid.dim - t) * vals[c][None, :]

    out = _pairs.row_sums(idx, idx, block) * grid.cell_volume
    if self_cell:
        out = out + _self_cell_integral(grid, t) * vals
    return SampledFunction(grid, riesz_constant(grid.dim, t) * out)


# -- Littlewood-Paley -------------------------------------------------------

def lp_profile(r):
    """Dyadic bump supported in [1/2, 2]: chi(r) - chi(2 r) with chi = 1 on [0, 1], 0 beyond 2."""
    r = np.asarray(r, dtype=float)
    return _chi(r) - _chi(2 * r)


def _chi(r):
    return 1.0 - smooth_step(r - 1.0)


@dataclass(frozen=True)
class FilterBank:
    j_min: int
    j_max: int

    def __post_init__(self):
        if self.j_max < self.j_min:
            raise ValueError("empty level range")

    @property
    def levels(self) -> range:
        return range(self.j_min, self.j_max + 1)

    @classmethod
    def for_grid(cls, grid: Grid) -> "FilterBank":
        """Smallest level range whose profiles sum to one on every nonzero grid frequency."""
        xi = frequency_magnitude(grid)
        lo = float(np.min(xi[xi > 0]))
        hi = float(np.max(xi))
        return cls(int(math.floor(math.log2(lo))), int(math.ceil(math.log2(hi))))

    def weight(self, j: int, xi: np.ndarray) -> np.ndarray:
        return lp_profile(xi / 2.0 ** j)

    def partition_sum(self, xi: np.ndarray) -> np.ndarray:
        # telescoping form of sum_j profile(xi / 2^j); exact 0/1 outside the ramps
        return _chi(xi / 2.0 ** self.j_max) - _chi(xi / 2.0 ** (self.j_min - 1))


@dataclass
class LPDecomposition:
    pieces: dict = field(default_factory=dict)
    residual: SampledFunction | None = None

    def reconstruct(self) -> SampledFunction:
        total = self.residual.values.copy()
        for piece in self.pieces.values():
            total = total + piece.values
        return SampledFunction(self.residual.grid, total)


def lp_project(f: SampledFunction, bank: FilterBank | None = None) -> LPDecomposition:
    """f_j = F^-1(profile(|xi| / 2^j) F f); the residual holds whatever the bank misses."""
    grid = f.grid
    bank = bank or FilterBank.for_grid(grid)
    xi = frequency_magnitude(grid)
    F = np.fft.rfftn(f.values)
    pieces = {}
    covered = np.zeros_like(xi)
    for j in bank.levels:
        w = bank.weight(j, xi)
        covered += w
        pieces[j] = SampledFunction(grid, np.fft.irfftn(F * w, s=grid.shape, axes=_axes(grid.shape)))
    residual = SampledFunction(grid, np.fft.irfftn(F * (1.0 - covered), s=grid.shape, axes=_axes(grid.shape)))
    return LPDecomposition(pieces, residual)


def triebel_norm(f: SampledFunction, s: float, p: float, bank: FilterBank | None = None) -> float:
    """(sum_j 2^{jsp} ||f_j||_p^p)^{1/p} over the levels of ``bank``."""
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if not 1 < p < np.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    dec = lp_project(f, bank)
    total = 0.0
    for j, fj in dec.pieces.items():
        total += 2.0 ** (j * s * p) * fj.lp_norm(p) ** p
    return total ** (1.0 / p)


def riesz_derivative_ratios(f: SampledFunction, t: float, sigma: float, p: float,
                            bank: FilterBank | None = None) -> dict:
    """Per level j: ||Lambda^{-sigma}|Lambda^t f_j| ||_p / (2^{j(t-sigma)} sum_{i=j-1}^{j+1} ||f_i||_p).

    ``|Lambda^t f_j|`` has a nonzero mean on the torus; it is removed before
    the Riesz potential is applied.
    """
    bank = bank or FilterBank.for_grid(f.grid)
    dec = lp_project(f, bank)
    norms = {j: fj.lp_norm(p) for j, fj in dec.pieces.items()}
    out = {}
    for j, fj in dec.pieces.items():
        denom = 2.0 ** (j * (t - sigma)) * sum(norms.get(i, 0.0) for i in (j - 1, j, j + 1))
        if denom <= 0 or norms[j] == 0:
            continue
        g = SampledFunction(f.grid, np.abs(frac_laplacian(fj, t).values))
        out[j] = riesz_potential(g, sigma).lp_norm(p) / denom
    return out
