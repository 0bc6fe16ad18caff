"""Gagliardo seminorms on box domains and the inequalities built from them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _pairs
from .grid import Box, Domain, Grid, SampledFunction, as_mask, mean_value


@dataclass(frozen=True)
class SeminormResult:
    value: float
    s: float
    p: float
    domain: object
    grid_resolution: int
    # the raw double sum, i.e. value**p before the root is taken
    value_p: float = field(repr=False, default=0.0)

    def __float__(self):
        return self.value


def _check_sp(s: float, p: float) -> None:
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if not 1 <= p < np.inf:
        raise ValueError(f"p must lie in [1, inf), got {p}")


def plap_double_sum(u: np.ndarray, phi: np.ndarray, grid: Grid, rows, cols, s: float, p: float) -> float:
    """sum_{i in rows, j in cols, i != j} |du|^(p-2) du dphi d^(-dim-sp) h^(2 dim).

    ``u`` and ``phi`` are flat value arrays. With ``phi is u`` this is the
    p-th power of the Gagliardo seminorm, term for term.
    """
    expo = grid.dim + s * p

    def block(r, c):
        w = _pairs.kernel_block(grid, r, c, expo)
        du = u[r][:, None] - u[c][None, :]
        dphi = du if phi is u else phi[r][:, None] - phi[c][None, :]
        if p < 2:
            # |du|^(p-2) blows up at du = 0; the term itself is 0 there
            a = np.abs(du)
            safe = np.where(a > 0, a, 1.0)
            return np.where(a > 0, safe ** (p - 2) * du * dphi, 0.0) * w
        return np.abs(du) ** (p - 2) * du * dphi * w

    return _pairs.pair_sum(rows, cols, block) * grid.cell_volume ** 2


def gagliardo_seminorm(u: SampledFunction, domain=None, s: float = 0.5, p: float = 2.0) -> SeminormResult:
    """[u]_{W^{s,p}(D)} with the diagonal cells left out.

    The omitted diagonal contributes O(h^{(1-s)p}) for Lipschitz ``u``.
    ``domain=None`` means the whole torus.
    """
    _check_sp(s, p)
    mask = as_mask(u.grid, domain)
    idx = _pairs.node_indices(mask)
    if idx.size == 0:
        raise ValueError("empty domain")
    flat = u.flat
    total = plap_double_sum(flat, flat, u.grid, idx, idx, s, p)
    return SeminormResult(total ** (1.0 / p), s, p, domain, u.grid.n_points, total)


def cross_sum(u: SampledFunction, rows_mask, cols_mask, s: float, p: float) -> float:
    """sum over x in rows, y in cols of |u(x)-u(y)|^p / d^(dim+sp), times h^(2 dim)."""
    flat = u.flat
    r = _pairs.node_indices(rows_mask)
    c = _pairs.node_indices(cols_mask)
    if r.size == 0 or c.size == 0:
        return 0.0
    return plap_double_sum(flat, flat, u.grid, r, c, s, p)


def _scaled_box(box: Box, lam: float, grid: Grid) -> Box:
    big = box.scaled(lam)
    if not big.inside_torus(grid, tol=1e-9 * grid.box_length):
        raise ValueError(f"{lam} x {box} = {big} exceeds the periodic box")
    return big.snapped(grid)


def _single_box(domain) -> Box:
    if isinstance(domain, Box):
        return domain
    if isinstance(domain, Domain) and len(domain.boxes) == 1:
        return domain.boxes[0]
    raise ValueError("expected a single box")


@dataclass
class PoincareReport:
    lhs: float
    rhs: float
    ratio: float


def poincare_check(u: SampledFunction, B, lam: float, t: float, p: float) -> PoincareReport:
    """Compare int_{lam B} |u - (u)_B|^p with lam^{n+tp} diam(B)^{tp} [u]^p_{W^{t,p}(lam B)}.

    Nothing is asserted; ``ratio`` is nan when both sides vanish.
    """
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    _check_sp(t, p)
    grid = u.grid
    box = _single_box(B)
    big = _scaled_box(box, lam, grid)
    big_mask = big.mask(grid)
    avg = mean_value(u, Domain.of(box))
    lhs = float(np.sum(np.abs(u.values[big_mask] - avg) ** p)) * grid.cell_volume
    semi = gagliardo_seminorm(u, Domain.of(big), t, p).value_p
    rhs = lam ** (grid.dim + t * p) * box.diam ** (t * p) * semi
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    if lhs == 0 and rhs == 0:
        ratio = float("nan")
    return PoincareReport(lhs, rhs, ratio)


@dataclass
class SplitReport:
    total: float
    covered: float
    tail: float
    tail_bound: float
    tail_constant: float
    per_box: list = field(default_factory=list)


def localized_seminorm_split(u: SampledFunction, cover, domain, s: float, eps: float, p: float) -> SplitReport:
    """Split [u]^p_{W^{s+eps,p}(D)} into doubled-box pieces and the disjoint-support tails.

    For each cover box B_k: covered_k = [u]^p_{W^{s+eps,p}(2B_k)} and
    tail_k = int_{D minus 2B_k} int_{B_k} |u(x)-u(y)|^p / |x-y|^{n+(s+eps)p}.
    Each tail is compared to diam(B_k)^{-eps p} [u]^p_{W^{s,p}(D)}; the largest
    ratio is reported as ``tail_constant``. The doubled boxes are clipped to D.
    """
    grid = u.grid
    _check_sp(s, p)
    if not 0 < s + eps < 1:
        raise ValueError("s + eps must lie in (0, 1)")
    dmask = as_mask(grid, domain)
    boxes = [_single_box(b) for b in cover]
    if not boxes:
        raise ValueError("empty cover")
    base = gagliardo_seminorm(u, dmask, s, p).value_p
    total = gagliardo_seminorm(u, dmask, s + eps, p).value_p
    covered = tail = bound = 0.0
    const = 0.0
    per_box = []
    for b in boxes:
        bmask = b.snapped(grid).mask(grid)
        if np.any(bmask & ~dmask):
            raise ValueError(f"cover box {b} is not contained in the domain")
        double = b.scaled(2.0).snapped(grid)
        dbl = np.zeros(grid.shape, dtype=bool)
        # clip to the periodic box before masking
        lo = tuple(max(0.0, a) for a in double.lo)
        hi = tuple(min(grid.box_length, c) for c in double.hi)
        dbl |= Box(lo, hi).mask(grid)
        dbl &= dmask
        cov_k = gagliardo_seminorm(u, dbl, s + eps, p).value_p
        tail_k = cross_sum(u, bmask, dmask & ~dbl, s + eps, p)
        bound_k = b.diam ** (-eps * p) * base
        c_k = tail_k / bound_k if bound_k > 0 else 0.0
        per_box.append({"box": b, "covered": cov_k, "tail": tail_k, "bound": bound_k, "constant": c_k})
        covered += cov_k
        tail += tail_k
        bound += bound_k
        const = max(const, c_k)
    return SplitReport(total, covered, tail, bound, const, per_box)
