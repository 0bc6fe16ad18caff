"""The nonlinear commutator R(u, phi), its proof kernels and the logarithmic potential functional.

R(u, phi) = (-Delta_p)^{s+eps}_B u[phi] - c (-Delta_p)^s_B u[Lambda^{eps p} phi]

is expected to scale like eps [u]^{p-1}_{W^{s+eps,p}} [phi]_{W^{s+eps,p}}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _pairs
from .grid import SampledFunction, as_mask
from .pairing import plap_pairing
from .report import ExperimentReport, loglog_fit
from .sobolev import gagliardo_seminorm
from .spectral import frac_laplacian


def riesz_gamma(n: int, t: float) -> float:
    """gamma(n, t) = pi^{n/2} 2^t Gamma(t/2) / Gamma((n-t)/2), the inverse Riesz normalization."""
    return math.pi ** (n / 2) * 2 ** t * math.gamma(t / 2) / math.gamma((n - t) / 2)


@dataclass(frozen=True)
class CommutatorConfig:
    s: float
    p: float
    eps: float
    t: float | None = None
    c_mode: str = "analytic"
    c_value: float | None = None
    dim: int = 1

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not 2 <= self.p < math.inf:
            raise ValueError(f"p must lie in [2, inf), got {self.p}")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if not self.s + self.eps < 1:
            raise ValueError(f"s + eps = {self.s + self.eps} must be < 1")
        if self.c_mode not in ("analytic", "calibrated"):
            raise ValueError(f"unknown c_mode {self.c_mode!r}")
        t = self.internal_t
        if not 0 < t < self.dim or not t + self.eps * self.p < self.dim:
            raise ValueError(f"need 0 < t and t + eps*p < {self.dim}; got t={t}, t+eps*p={t + self.eps * self.p}")

    @property
    def internal_t(self) -> float:
        return self.t if self.t is not None else (self.dim - self.eps * self.p) / 2

    def resolved(self) -> "CommutatorConfig":
        """Copy with t filled in and, in analytic mode, c_value computed."""
        c = self.c_value
        if self.c_mode == "analytic":
            c = analytic_c(self.dim, self.internal_t, self.eps, self.p)
        elif c is None:
            raise ValueError("calibrated mode needs c_value; see calibrate_c")
        return replace(self, t=self.internal_t, c_value=c)


def analytic_c(dim: int, t: float, eps: float, p: float) -> float:
    if eps == 0:
        return 1.0
    return riesz_gamma(dim, t) / riesz_gamma(dim, t + eps * p)


# -- point kernels ------------------------------------------------------------

def _dist(a, b, box_length=None):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if box_length is not None:
        return _pairs.torus_distance(a, b, box_length)
    return np.sqrt(np.sum((a - b) ** 2, axis=-1))


def _distances(x, y, z, box_length):
    rxy, rxz, ryz = _dist(x, y, box_length), _dist(x, z, box_length), _dist(y, z, box_length)
    if np.any(rxy == 0) or np.any(rxz == 0) or np.any(ryz == 0):
        raise ValueError("kernel evaluated at coincident points")
    return rxy, rxz, ryz


def kappa_eps(x, y, z, t: float, eps: float, p: float, dim: int = 1, box_length=None):
    """kappa_eps(x,y,z) = (|x-z|^{t+eps p-n} - |y-z|^{t+eps p-n}) / |x-y|^{eps p} - (|x-z|^{t-n} - |y-z|^{t-n}).

    Vanishes identically at eps = 0. Points are 1-d arrays of length ``dim``
    (or stacks of them); torus distances are used when ``box_length`` is given.
    """
    rxy, rxz, ryz = _distances(x, y, z, box_length)
    a = t + eps * p - dim
    b = t - dim
    val = (rxz ** a - ryz ** a) / rxy ** (eps * p) - (rxz ** b - ryz ** b)
    return val if np.ndim(val) else float(val)


def k_log(x, y, z, alpha: float, dim: int = 1, box_length=None):
    """k(x,y,z) = |x-z|^{alpha-n} log(|x-z|/|x-y|) - |y-z|^{alpha-n} log(|y-z|/|x-y|)."""
    rxy, rxz, ryz = _distances(x, y, z, box_length)
    e = alpha - dim
    val = rxz ** e * np.log(rxz / rxy) - ryz ** e * np.log(ryz / rxy)
    return val if np.ndim(val) else float(val)


def k_delta(x, y, z, t: float, delta: float, p: float, dim: int = 1, box_length=None):
    """|x-y|^{delta p} d/d(delta) kappa_delta, which is p * k_log with alpha = t + delta p."""
    return p * k_log(x, y, z, t + delta * p, dim, box_length)


def kappa_from_derivative(x, y, z, t: float, eps: float, p: float, dim: int = 1, box_length=None,
                          nodes: int = 10) -> float:
    """int_0^eps |x-y|^{-delta p} k_delta d(delta) by ``nodes``-point Gauss-Legendre."""
    g, w = np.polynomial.legendre.leggauss(nodes)
    deltas = 0.5 * eps * (g + 1)
    rxy = _dist(x, y, box_length)
    vals = [rxy ** (-d * p) * k_delta(x, y, z, t, d, p, dim, box_length) for d in deltas]
    return float(0.5 * eps * np.dot(w, np.array(vals, dtype=float).reshape(nodes, -1)[:, 0]))


# -- the commutator -----------------------------------------------------------

def _check_support(phi: SampledFunction, B) -> None:
    if B is None:
        return
    mask = as_mask(phi.grid, B)
    outside = np.abs(phi.values[~mask])
    if outside.size and np.max(outside) > 1e-13 * max(1.0, float(np.max(np.abs(phi.values)))):
        raise ValueError("phi is not supported in B")


def commutator_parts(u: SampledFunction, phi: SampledFunction, B, cfg: CommutatorConfig) -> tuple[float, float]:
    """(first pairing, second pairing without c): R = first - c * second."""
    _check_support(phi, B)
    first = plap_pairing(u, phi, B, cfg.s + cfg.eps, cfg.p).value
    shifted = phi if cfg.eps == 0 else frac_laplacian(phi, cfg.eps * cfg.p)
    second = plap_pairing(u, shifted, B, cfg.s, cfg.p).value
    return first, second


def commutator_R(u: SampledFunction, phi: SampledFunction, B, cfg: CommutatorConfig) -> float:
    """R(u, phi) for the resolved constant of ``cfg``; exactly 0 at eps = 0."""
    cfg = cfg.resolved()
    first, second = commutator_parts(u, phi, B, cfg)
    return first - cfg.c_value * second


def calibrate_c(probes, B, s: float, p: float, eps: float, dim: int = 1, t: float | None = None) -> float:
    """argmin_c sum over probe pairs (u, phi) of |R|^2, in closed form."""
    cfg = CommutatorConfig(s, p, eps, t=t, c_mode="calibrated", c_value=1.0, dim=dim)
    num = den = 0.0
    for u, phi in probes:
        a, b = commutator_parts(u, phi, B, cfg)
        num += a * b
        den += b * b
    if den == 0:
        raise ValueError("probe family gives a degenerate calibration")
    return num / den


def eps_sweep_experiment(u: SampledFunction, phi: SampledFunction, B, s: float, p: float, eps_list,
                         c_mode: str = "analytic", t: float | None = None, probes=None,
                         report: ExperimentReport | None = None) -> ExperimentReport:
    """Sweep eps, tabulate R with its normalizing seminorms and fit the log-log slope.

    In calibrated mode, ``probes`` (pairs of sampled functions, disjoint from
    the pair under test) fix c separately for each eps.
    """
    eps_list = [float(e) for e in eps_list]
    if eps_list != sorted(eps_list):
        raise ValueError("eps_list must be sorted")
    if c_mode == "calibrated" and not probes:
        raise ValueError("calibrated mode needs a probe family")
    dim = u.grid.dim
    rep = report or ExperimentReport("commutator-sweep")
    table = rep.new_table("commutator_sweep", [
        ("eps", "1"), ("t", "1"), ("c_value", "1"), ("R", "pairing units"),
        ("u_seminorm", "W^{s+eps,p}(B)"), ("phi_seminorm", "W^{s+eps,p}(torus)"),
        ("normalized_ratio", "1")])
    Rs, eps_used, ratios = [], [], []
    for eps in eps_list:
        if c_mode == "calibrated":
            c = calibrate_c(probes, B, s, p, eps, dim, t)
            cfg = CommutatorConfig(s, p, eps, t=t, c_mode="calibrated", c_value=c, dim=dim)
        else:
            cfg = CommutatorConfig(s, p, eps, t=t, dim=dim)
        cfg = cfg.resolved()
        R = commutator_R(u, phi, B, cfg)
        us = gagliardo_seminorm(u, B, s + eps, p).value
        ps = gagliardo_seminorm(phi, None, s + eps, p).value
        denom = eps * us ** (p - 1) * ps
        ratio = abs(R) / denom if denom > 0 else float("nan")
        table.add(eps, cfg.t, cfg.c_value, R, us, ps, ratio)
        if eps > 0:
            Rs.append(R)
            eps_used.append(eps)
            ratios.append(ratio)
    slope, err = loglog_fit(eps_used, Rs)
    rep.fit("loglog_slope", slope, err)
    finite = [r for r in ratios if math.isfinite(r) and r > 0]
    spread = max(finite) / min(finite) if finite else float("nan")
    rep.fit("normalized_ratio_spread", spread)
    if not math.isfinite(slope):
        rep.notes.append("slope undefined: R vanishes for some eps")
    return rep


# -- logarithmic potential -----------------------------------------------------

@dataclass(frozen=True)
class LogKernelParams:
    alpha: float
    beta: float
    gamma: float
    dim: int = 1

    def __post_init__(self):
        n = self.dim
        if not 0 < self.alpha < n:
            raise ValueError(f"alpha must lie in (0, {n}), got {self.alpha}")
        if not 0 < self.beta < n:
            raise ValueError(f"beta must lie in (0, {n}), got {self.beta}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 < self.s < 1:
            raise ValueError(f"s = gamma + beta - alpha = {self.s} must lie in (0, 1)")

    @property
    def s(self) -> float:
        return self.gamma + self.beta - self.alpha


LOGPOT_MAX_POINTS = 256


def log_potential_A(phi: SampledFunction, params: LogKernelParams, p: float) -> float:
    """A(phi) = (sum_{x != y} |T(x,y)|^p d(x,y)^{-1-gamma p} h^2)^{1/p}.

    T(x,y) = sum_{z not in {x,y}} k(x,y,z) Lambda^beta phi(z) h. Splitting
    k into single-point kernels turns the triple sum into two matrix-vector
    products: the z = y term of the x-part and the z = x term of the y-part
    vanish because log(|x-y|/|x-y|) = 0.
    """
    grid = phi.grid
    if grid.dim != 1:
        raise ValueError("log_potential_A is implemented in one dimension only")
    if grid.n_points > LOGPOT_MAX_POINTS:
        raise ValueError(f"log_potential_A is limited to n_points <= {LOGPOT_MAX_POINTS}")
    if not 1 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    g = frac_laplacian(phi, params.beta).flat
    n = grid.n_points
    idx = np.arange(n)
    d = _pairs.distances(grid, idx, idx)
    off = d > 0
    e = params.alpha - 1
    P = np.zeros_like(d)
    Q = np.zeros_like(d)
    P[off] = d[off] ** e
    Q[off] = P[off] * np.log(d[off])
    h = grid.h
    Pg = np.sum(P * g[None, :], axis=1) * h
    Qg = np.sum(Q * g[None, :], axis=1) * h
    logd = np.zeros_like(d)
    logd[off] = np.log(d[off])
    T = (Qg[:, None] - Qg[None, :]) - logd * (Pg[:, None] - Pg[None, :])
    w = np.zeros_like(d)
    w[off] = d[off] ** (-1 - params.gamma * p)
    total = float(np.sum(np.sum(np.abs(T) ** p * w, axis=1))) * h * h
    return total ** (1.0 / p)


def log_potential_ratio(phi: SampledFunction, params: LogKernelParams, p: float) -> float:
    """A(phi) / [phi]_{W^{s,p}(torus)} with s = gamma + beta - alpha."""
    a = log_potential_A(phi, params, p)
    semi = gagliardo_seminorm(phi, None, params.s, p).value
    return a / semi if semi > 0 else float("nan")
