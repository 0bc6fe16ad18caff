"""Variational solver for the fractional p-Laplace Dirichlet problem and the regularity probes.

The energy is E(u) = (1/p) [u]^p_{W^{s,p}(torus)} - int_Omega f u with u frozen
to the exterior data outside Omega; only interior node values move.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _pairs
from .grid import Box, Domain, FracParams, Grid, SampledFunction, mean_value
from .pairing import TestSpace, dual_norm_estimate
from .report import ExperimentReport
from .sobolev import gagliardo_seminorm

log = logging.getLogger(__name__)


ROUNDING_FLOOR = 1e-7


class ConstraintViolation(ValueError):
    """The iterate differs from the exterior data outside Omega."""


@dataclass(frozen=True)
class DirichletProblem:
    domain: Domain
    forcing: SampledFunction
    exterior_data: SampledFunction
    params: FracParams

    def __post_init__(self):
        grid = self.forcing.grid
        if self.exterior_data.grid != grid:
            raise ValueError("forcing and exterior data live on different grids")
        mask = self.domain.mask(grid)
        if mask.all():
            raise ValueError("Omega must leave some exterior inside the torus")

    @property
    def grid(self) -> Grid:
        return self.forcing.grid

    @property
    def mask(self) -> np.ndarray:
        return self.domain.mask(self.grid)

    def initial_guess(self) -> SampledFunction:
        vals = self.exterior_data.values.copy()
        vals[self.mask] = 0.0
        return SampledFunction(self.grid, vals)


@dataclass
class SolverState:
    u: SampledFunction
    energy: float
    dual_residual: float
    iteration: int
    grad_norm: float = 0.0
    converged: bool = False
    energies: list = field(default_factory=list)
    message: str = ""


@functools.lru_cache(maxsize=8)
def _kernel_rows(grid: Grid, mask_bytes: bytes, s: float, p: float):
    """Interior indices, d^{-n-sp} rows (interior x all nodes) and the energy multiplicities."""
    mask = np.frombuffer(mask_bytes, dtype=bool).reshape(grid.shape)
    inner = _pairs.node_indices(mask)
    allidx = np.arange(grid.size)
    W = _pairs.kernel_block(grid, inner, allidx, grid.dim + s * p) * grid.cell_volume ** 2
    # interior-interior pairs are met twice among the rows, interior-exterior pairs once
    mult = np.where(mask.reshape(-1), 1.0, 2.0)
    Wm = W * mult[None, :]
    for arr in (W, Wm):
        arr.setflags(write=False)
    return inner, W, Wm


class _Energy:
    """Row-restricted energy and gradient for one problem; kernel rows are cached."""

    def __init__(self, prob: DirichletProblem):
        self.prob = prob
        grid = prob.grid
        self.grid = grid
        self.p = prob.params.p
        mask = prob.mask
        self.inner, self.W, self.Wm = _kernel_rows(grid, mask.tobytes(), prob.params.s, self.p)
        self.f_inner = prob.forcing.flat[self.inner] * grid.cell_volume
        self.full = prob.exterior_data.flat.copy()

    def vector(self, inner_vals):
        v = self.full.copy()
        v[self.inner] = inner_vals
        return v

    def _diffs(self, x):
        v = self.vector(x)
        return x[:, None] - v[None, :]

    def pair_part(self, x):
        du = self._diffs(x)
        return float(np.sum(np.sum(np.abs(du) ** self.p * self.Wm, axis=1))) / self.p

    def value(self, x):
        return self.pair_part(x) - float(np.sum(self.f_inner * x))

    def delta(self, x_new, x_old):
        """E(x_new) - E(x_old) summed term by term, which keeps rounding relative to each term."""
        a = np.abs(self._diffs(x_new)) ** self.p
        b = np.abs(self._diffs(x_old)) ** self.p
        pair = float(np.sum(np.sum((a - b) * self.Wm, axis=1))) / self.p
        return pair - float(np.sum(self.f_inner * (x_new - x_old)))

    def gradient(self, x):
        du = self._diffs(x)
        g = 2 * np.sum(np.abs(du) ** (self.p - 2) * du * self.W, axis=1)
        return g - self.f_inner


def _exterior_frozen(u: SampledFunction, prob: DirichletProblem) -> None:
    out = ~prob.mask
    if not np.array_equal(u.values[out], prob.exterior_data.values[out]):
        raise ConstraintViolation("u differs from the exterior data outside Omega")


def energy(u: SampledFunction, prob: DirichletProblem) -> float:
    """(1/p) [u]^p_{W^{s,p}(torus)} - int_Omega f u."""
    _exterior_frozen(u, prob)
    s, p = prob.params.s, prob.params.p
    semi = gagliardo_seminorm(u, None, s, p).value_p
    mask = prob.mask
    return semi / p - float(np.sum(prob.forcing.values[mask] * u.values[mask])) * u.grid.cell_volume


def residual_test_space(prob: DirichletProblem, size: int = 32, seed: int = 0) -> TestSpace:
    return TestSpace(order=prob.params.s, size=size, seed=seed)


def dual_residual(u: SampledFunction, prob: DirichletProblem, test_space: TestSpace | None = None) -> float:
    """Dictionary estimate of the dual norm of (-Delta_p)^s u - f over test functions in Omega."""
    ts = test_space or residual_test_space(prob)
    s, p = prob.params.s, prob.params.p
    return dual_norm_estimate(u, None, s, p, ts, support=prob.domain, forcing=prob.forcing)


def solve(prob: DirichletProblem, tol: float = 1e-8, max_iter: int = 20000, u0: SampledFunction | None = None,
          test_space: TestSpace | None = None, armijo: float = 1e-4) -> SolverState:
    """Gradient descent on E over the interior nodes with a backtracking line search.

    The trial step is the Barzilai-Borwein length and is halved until the
    Armijo condition holds, so accepted energies never increase. Stops when
    |grad E| <= tol |grad E(u0)|. Non-convergence is reported in the state,
    not raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if prob.params.p < 2:
        raise ValueError("p must be >= 2")
    en = _Energy(prob)
    u = u0 if u0 is not None else prob.initial_guess()
    _exterior_frozen(u, prob)
    x = u.flat[en.inner].copy()
    # exterior-exterior pairs never change; carried as a constant offset
    E = energy(u, prob)
    g = en.gradient(x)
    g0 = float(np.linalg.norm(g))
    energies = [E]
    step = None
    x_prev = g_prev = None
    converged = g0 == 0.0
    msg = "zero initial gradient" if converged else ""
    it = 0
    gnorm = g0
    while not converged and it < max_iter:
        if step is None:
            step = 1.0 / max(1e-300, float(np.max(np.sum(np.abs(en.W), axis=1))) * 2 * max(1.0, np.max(np.abs(x)) + 1) ** (prob.params.p - 2))
        elif x_prev is not None:
            sv, yv = x - x_prev, g - g_prev
            sy = float(np.dot(sv, yv))
            step = float(np.dot(sv, sv)) / sy if sy > 0 else step * 2
        gg = float(np.dot(g, g))
        for _ in range(80):
            x_new = x - step * g
            dE = en.delta(x_new, x)
            if dE <= -armijo * step * gg:
                break
            step *= 0.5
        else:
            # no representable decrease left: accept if the gradient is already at the rounding floor
            if gnorm <= ROUNDING_FLOOR * g0:
                converged = True
                msg = "stalled at rounding floor"
            else:
                msg = "line search failed"
            break
        x_prev, g_prev = x, g
        x = x_new
        E = E + dE
        energies.append(E)
        g = en.gradient(x)
        gnorm = float(np.linalg.norm(g))
        it += 1
        if gnorm <= tol * g0:
            converged = True
            msg = "gradient tolerance reached"
    if not converged and not msg:
        msg = "max_iter reached"
    u = SampledFunction(prob.grid, en.vector(x).reshape(prob.grid.shape))
    res = dual_residual(u, prob, test_space)
    rel = gnorm / g0 if g0 > 0 else 0.0
    log.info("solve: %s after %d iterations, relative gradient %.3e", msg, it, rel)
    return SolverState(u, E, res, it, rel, converged, energies, msg)


def linear_oracle(prob: DirichletProblem) -> SampledFunction:
    """Direct solve of the p = 2 Euler-Lagrange system on the interior nodes."""
    if prob.params.p != 2:
        raise ValueError("linear oracle needs p = 2")
    grid = prob.grid
    mask = prob.mask.reshape(-1)
    inner = np.flatnonzero(mask)
    outer = np.flatnonzero(~mask)
    K = _pairs.kernel_block(grid, np.arange(grid.size), np.arange(grid.size), grid.dim + 2 * prob.params.s)
    K = K * grid.cell_volume ** 2
    A = -2 * K[np.ix_(inner, inner)]
    A[np.diag_indices_from(A)] = 2 * K[inner].sum(axis=1)
    g = prob.exterior_data.flat
    b = prob.forcing.flat[inner] * grid.cell_volume + 2 * K[np.ix_(inner, outer)] @ g[outer]
    vals = g.copy()
    vals[inner] = np.linalg.solve(A, b)
    return SampledFunction(grid, vals.reshape(grid.shape))


# -- localization and local estimates ------------------------------------------

def quintic_step(t):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t * t * t * (10 - 15 * t + 6 * t * t)


def cutoff(grid: Grid, inner: Box, outer: Box) -> np.ndarray:
    """eta = 1 on ``inner``, 0 off ``outer``, quintic ramps across the margins (Lipschitz ~ 1.875 / margin)."""
    x = grid.coordinates()
    eta = np.ones(grid.shape)
    for a in range(grid.dim):
        xa = x[..., a]
        lo2, lo1, hi1, hi2 = outer.lo[a], inner.lo[a], inner.hi[a], outer.hi[a]
        up = quintic_step((xa - lo2) / (lo1 - lo2))
        down = quintic_step((hi2 - xa) / (hi2 - hi1))
        ramp = np.where(xa < lo1, up, np.where(xa >= hi1, down, 1.0))
        ramp = np.where((xa < lo2) | (xa >= hi2), 0.0, ramp)
        eta = eta * ramp
    # exact 1 on inner nodes, exact 0 off outer nodes
    eta[inner.mask(grid)] = 1.0
    eta[~outer.mask(grid)] = 0.0
    return eta


def _box(d) -> Box:
    if isinstance(d, Box):
        return d
    if isinstance(d, Domain) and len(d.boxes) == 1:
        return d.boxes[0]
    raise ValueError("expected a single box")


def localize(u: SampledFunction, omega1, omega2) -> SampledFunction:
    """u~ = eta (u - (u)_{Omega1}) with eta = 1 on Omega1 and supp eta in Omega2."""
    grid = u.grid
    b1, b2 = _box(omega1).snapped(grid), _box(omega2).snapped(grid)
    for b in (b1, b2):
        if not b.inside_torus(grid):
            raise ValueError(f"{b} leaves the periodic box")
    margin = min(min(l1 - l2 for l1, l2 in zip(b1.lo, b2.lo)), min(h2 - h1 for h1, h2 in zip(b1.hi, b2.hi)))
    if margin < 2 * grid.h - 1e-12:
        raise ValueError(f"Omega1 needs a margin of at least 2 cells inside Omega2 (got {margin / grid.h:.2f})")
    avg = mean_value(u, Domain.of(b1))
    eta = cutoff(grid, b1, b2)
    return SampledFunction(grid, eta * (u.values - avg))


@dataclass
class CaccioppoliReport:
    lhs: float
    rhs_parts: dict
    satisfied_constant: float


def caccioppoli_check(u: SampledFunction, B, s: float, p: float, delta: float,
                      test_space: TestSpace | None = None) -> CaccioppoliReport:
    """Smallest C with [u]^p_B <= delta^p [u]^p_{4B} + C (sup-term + mean-oscillation term).

    sup-term: delta^{-p'} (sup_phi (-Delta_p)^s_{4B} u[phi])^{p/(p-1)} over a dictionary of
    phi in 2B with unit W^{s,p} seminorm; a dictionary only bounds the sup from
    below, so the reported C overestimates the true one.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    grid = u.grid
    box = _box(B).snapped(grid)
    four = box.scaled(4.0)
    if not four.inside_torus(grid, tol=1e-9):
        raise ValueError("4B leaves the periodic box")
    four = four.snapped(grid)
    two = box.scaled(2.0).snapped(grid)
    pp = p / (p - 1)
    ts = test_space or TestSpace(order=s, size=32, seed=0)
    lhs = gagliardo_seminorm(u, Domain.of(box), s, p).value_p
    part1 = delta ** p * gagliardo_seminorm(u, Domain.of(four), s, p).value_p
    sup = dual_norm_estimate(u, Domain.of(four), s, p, ts, support=Domain.of(two))
    part2 = delta ** (-pp) * sup ** pp
    avg = mean_value(u, Domain.of(box))
    osc = float(np.sum(np.abs(u.values[four.mask(grid)] - avg) ** p)) * grid.cell_volume
    part3 = delta ** (-pp) * box.diam ** (-s * p) * osc
    excess = lhs - part1
    if excess <= 0:
        c = 0.0
    elif part2 + part3 > 0:
        c = excess / (part2 + part3)
    else:
        c = math.inf
    return CaccioppoliReport(lhs, {"delta_term": part1, "sup_term": part2, "oscillation_term": part3}, c)


def differentiability_probe(prob: DirichletProblem, u: SampledFunction, omega1, eps_list,
                            refined: tuple | None = None, test_size: int = 32, seed: int = 0,
                            stable_rtol: float = 0.10, report: ExperimentReport | None = None) -> ExperimentReport:
    """Tabulate [u]_{W^{s+eps,p}(Omega1)} against the dual norm of the forcing and the implied constant.

    The forcing seen by Omega is the regional operator (-Delta_p)^s_Omega u,
    estimated in the dual of W_0^{s - eps(p-1), p}(Omega). With ``refined``
    = (prob2, u2) on a finer grid the same quantities are recomputed there and
    each eps is flagged stable if the Omega1 seminorm moves by less than
    ``stable_rtol``.
    """
    s, p = prob.params.s, prob.params.p
    rep = report or ExperimentReport("probe")
    table = rep.new_table("differentiability_probe", [
        ("n_points", "1"), ("eps", "1"), ("local_seminorm", "W^{s+eps,p}(Omega1)"),
        ("forcing_dual_norm", "dual W_0^{s-eps(p-1),p}(Omega)"), ("base_seminorm", "W^{s,p}(Omega)"),
        ("implied_constant", "1")])
    runs = [(prob, u)] + ([refined] if refined is not None else [])
    local = {}
    for pr, uu in runs:
        base = gagliardo_seminorm(uu, pr.domain, s, p).value
        for eps in eps_list:
            if not s + eps < 1:
                raise ValueError(f"s + eps = {s + eps} must be < 1")
            order = s - eps * (p - 1)
            if not order > 0:
                raise ValueError(f"s - eps (p-1) = {order} must be > 0")
            loc = gagliardo_seminorm(uu, omega1, s + eps, p).value
            dual = dual_norm_estimate(uu, pr.domain, s, p, TestSpace(order, test_size, seed), support=pr.domain)
            denom = dual + base
            implied = loc / denom if denom > 0 else 0.0
            table.add(pr.grid.n_points, eps, loc, dual, base, implied)
            local[(pr.grid.n_points, eps)] = (loc, implied)
    if refined is not None:
        n0, n1 = prob.grid.n_points, refined[0].grid.n_points
        best = None
        stab = rep.new_table("refinement_stability", [
            ("eps", "1"), ("seminorm_change", "relative"), ("constant_change", "relative"), ("stable", "bool")])
        for eps in eps_list:
            a, ca = local[(n0, eps)]
            b, cb = local[(n1, eps)]
            ch = abs(b - a) / abs(a) if a else 0.0
            cch = abs(cb - ca) / abs(ca) if ca else 0.0
            ok = ch < stable_rtol
            stab.add(eps, ch, cch, int(ok))
            if ok:
                best = eps
        rep.fit("largest_stable_eps", float("nan") if best is None else best)
    return rep
