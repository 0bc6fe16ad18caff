"""Distributional fractional p-Laplacian pairings and dictionary dual norms."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _pairs
from .grid import Box, Domain, FracParams, Grid, SampledFunction, as_mask
from .sobolev import gagliardo_seminorm, plap_double_sum


class SpecViolation(ValueError):
    """An OperatorSpec failed one of its structural bounds on a probe sample."""

    def __init__(self, message, sample):
        super().__init__(f"{message} (sample: {sample})")
        self.sample = sample


@dataclass(frozen=True)
class PairingValue:
    value: float
    u_id: str
    phi_id: str
    params: FracParams | None
    domain: object

    def __float__(self):
        return self.value


def _check(s, p):
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if not 2 <= p < np.inf:
        raise ValueError(f"p must lie in [2, inf), got {p}")


def _same_grid(u, phi):
    if u.grid != phi.grid:
        raise ValueError("u and phi live on different grids")


def plap_pairing(u: SampledFunction, phi: SampledFunction, domain=None, s: float = 0.5, p: float = 2.0,
                 u_id: str = "u", phi_id: str = "phi") -> PairingValue:
    """(-Delta_p)^s_D u[phi]: the double sum of |du|^{p-2} du dphi / d^{n+sp} over D x D, i != j."""
    _check(s, p)
    _same_grid(u, phi)
    idx = _pairs.node_indices(as_mask(u.grid, domain))
    if idx.size == 0:
        raise ValueError("empty domain")
    val = plap_double_sum(u.flat, phi.flat, u.grid, idx, idx, s, p)
    return PairingValue(val, u_id, phi_id, FracParams(s, p, dim=u.grid.dim), domain)


def pairing_density(u: SampledFunction, domain=None, s: float = 0.5, p: float = 2.0) -> np.ndarray:
    """Row vector r with plap_pairing(u, phi, D) = sum_i r_i phi_i for every phi.

    r_i = 2 h^{2n} sum_{j in D} |u_i - u_j|^{p-2} (u_i - u_j) d_ij^{-n-sp} on D, 0 elsewhere.
    Summation order differs from :func:`plap_pairing`, so agreement is to rounding.
    """
    _check(s, p)
    grid = u.grid
    mask = as_mask(grid, domain)
    idx = _pairs.node_indices(mask)
    flat = u.flat
    expo = grid.dim + s * p

    def block(r, c):
        w = _pairs.kernel_block(grid, r, c, expo)
        du = flat[r][:, None] - flat[c][None, :]
        return np.abs(du) ** (p - 2) * du * w

    dens = np.zeros(grid.size)
    dens[idx] = 2 * _pairs.row_sums(idx, idx, block) * grid.cell_volume ** 2
    return dens


# -- generalized operators ----------------------------------------------------

def power_nonlinearity(p: float) -> Callable:
    def phi(t):
        return np.abs(t) ** (p - 2) * t
    return phi


def power_kernel(s: float, p: float, dim: int, box_length: float = 1.0) -> Callable:
    def kernel(x, y):
        d = _pairs.torus_distance(x, y, box_length)
        d = np.where(d > 0, d, np.inf)
        return d ** (-(dim + s * p))
    return kernel


@dataclass
class OperatorSpec:
    """Nonlinearity Phi and kernel K with comparability constant ``c_op``.

    ``kernel`` takes point arrays of shape (..., dim) and must be vectorized.
    It is symmetrized as (K(x,y) + K(y,x)) / 2 before use.
    """

    nonlinearity: Callable
    kernel: Callable
    c_op: float
    s: float
    p: float
    dim: int = 1
    box_length: float = 1.0
    verified: bool = field(default=False, init=False)

    def verify(self, n_probe: int = 257, seed: int = 0, rtol: float = 1e-12) -> None:
        if self.c_op < 1:
            raise SpecViolation("comparability constant must be >= 1", self.c_op)
        _check(self.s, self.p)
        ts = np.concatenate([np.linspace(-10, 10, n_probe), np.geomspace(1e-6, 1e3, n_probe)])
        ts = np.concatenate([ts, -ts])
        ph = np.asarray(self.nonlinearity(ts), dtype=float)
        a = np.abs(ts) ** (self.p - 1)
        bad = np.abs(ph) > self.c_op * a * (1 + rtol) + 1e-300
        if bad.any():
            t = float(ts[np.argmax(bad)])
            raise SpecViolation("|Phi(t)| <= C |t|^(p-1) fails", t)
        bad = ph * ts < np.abs(ts) ** self.p * (1 - rtol)
        if bad.any():
            t = float(ts[np.argmax(bad)])
            raise SpecViolation("Phi(t) t >= |t|^p fails", t)
        rng = np.random.default_rng(seed)
        L = self.box_length
        x = rng.uniform(0, L, size=(n_probe, self.dim))
        y = rng.uniform(0, L, size=(n_probe, self.dim))
        d = _pairs.torus_distance(x, y, L)
        keep = d > 1e-9 * L
        x, y, d = x[keep], y[keep], d[keep]
        k = 0.5 * (np.asarray(self.kernel(x, y)) + np.asarray(self.kernel(y, x)))
        ref = d ** (-(self.dim + self.s * self.p))
        bad = (k < ref / self.c_op * (1 - rtol)) | (k > ref * self.c_op * (1 + rtol))
        if bad.any():
            i = int(np.argmax(bad))
            raise SpecViolation("kernel comparability fails", (x[i].tolist(), y[i].tolist(), float(k[i])))
        self.verified = True


def general_pairing(u: SampledFunction, phi: SampledFunction, domain, spec: OperatorSpec,
                    u_id: str = "u", phi_id: str = "phi") -> PairingValue:
    """L_{Phi,K,D}(u)[phi] = sum_{i != j} K(x_i, x_j) Phi(u_i - u_j)(phi_i - phi_j) h^{2n}."""
    _same_grid(u, phi)
    if not spec.verified:
        spec.verify()
    grid = u.grid
    idx = _pairs.node_indices(as_mask(grid, domain))
    if idx.size == 0:
        raise ValueError("empty domain")
    coords = grid.coordinates().reshape(-1, grid.dim)
    uf, pf = u.flat, phi.flat

    def block(r, c):
        xr = coords[r][:, None, :]
        xc = coords[c][None, :, :]
        k = 0.5 * (spec.kernel(xr, xc) + spec.kernel(xc, xr))
        k = np.where(r[:, None] == c[None, :], 0.0, k)
        du = uf[r][:, None] - uf[c][None, :]
        dphi = pf[r][:, None] - pf[c][None, :]
        return spec.nonlinearity(du) * dphi * k

    val = _pairs.pair_sum(idx, idx, block) * grid.cell_volume ** 2
    return PairingValue(val, u_id, phi_id, FracParams(spec.s, spec.p, dim=grid.dim), domain)


# -- dual norms by finite dictionaries ---------------------------------------

@dataclass(frozen=True)
class TestSpace:
    order: float
    size: int
    seed: int = 0


def _support_boxes(grid: Grid, support) -> list[Box]:
    if support is None:
        return [Domain.full(grid).boxes[0]]
    if isinstance(support, Box):
        return [support]
    return list(support.boxes)


def _bump(grid: Grid, center, radius: float) -> np.ndarray:
    x = grid.coordinates()
    r = np.sqrt(np.sum((x - np.asarray(center)) ** 2, axis=-1)) / radius
    inside = r < 1
    out = np.zeros(grid.shape)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _raw_dictionary(grid: Grid, boxes: tuple, size: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    h = grid.h
    out = []
    while len(out) < size:
        box = boxes[int(rng.integers(len(boxes)))]
        half = min(box.sides) / 2
        radius = rng.uniform(max(4 * h, 0.15 * half), half)
        lo = np.array(box.lo) + radius
        hi = np.array(box.hi) - radius
        center = rng.uniform(lo, np.maximum(hi, lo))
        f = _bump(grid, center, radius)
        # every other element carries an oscillation
        if len(out) % 2 == 1:
            L = grid.box_length
            k = rng.integers(1, max(2, int(L / max(radius, h))) + 1)
            phase = rng.uniform(0, 2 * np.pi)
            x = grid.coordinates()[..., 0]
            f = f * np.cos(2 * np.pi * k * (x - center[0]) / L + phase)
        if np.max(np.abs(f)) > 0:
            out.append(f)
    return out


@functools.lru_cache(maxsize=16)
def _dictionary(grid: Grid, boxes: tuple, order: float, p: float, size: int, seed: int) -> np.ndarray:
    raw = _raw_dictionary(grid, boxes, size, seed)
    rows = []
    for f in raw:
        nrm = gagliardo_seminorm(SampledFunction(grid, f), None, order, p).value
        rows.append(f.reshape(-1) / nrm)
    arr = np.array(rows)
    arr.setflags(write=False)
    return arr


def test_dictionary(grid: Grid, support, space: TestSpace, p: float) -> np.ndarray:
    """Seeded test functions (rows) supported in ``support``, unit W^{order,p} seminorm on the torus.

    Element k depends only on (seed, k), so a smaller dictionary is a prefix of a larger one.
    """
    if space.size < 1:
        raise ValueError("empty dictionary")
    if not 0 < space.order < 1:
        raise ValueError(f"test-space order must lie in (0, 1), got {space.order}")
    boxes = tuple(b.snapped(grid) for b in _support_boxes(grid, support))
    return _dictionary(grid, boxes, float(space.order), float(p), int(space.size), int(space.seed))


test_dictionary.__test__ = False
TestSpace.__test__ = False


def dual_norm_estimate(u: SampledFunction, domain, s: float, p: float, test_space: TestSpace,
                       support=None, forcing: SampledFunction | None = None) -> float:
    """max over the dictionary of |(-Delta_p)^s_D u[phi] - int f phi|.

    A lower bound for the dual norm; nondecreasing in the dictionary size.
    Dictionary elements live in ``support`` (defaults to ``domain``).
    """
    grid = u.grid
    dictionary = test_dictionary(grid, support if support is not None else domain, test_space, p)
    dens = pairing_density(u, domain, s, p)
    if forcing is not None:
        dens = dens - forcing.flat * grid.cell_volume
    # row-wise np.sum rather than BLAS so the result is independent of thread count
    vals = np.abs(np.sum(dictionary * dens[None, :], axis=1))
    return float(np.max(vals))
