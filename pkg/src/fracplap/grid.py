"""Uniform periodic grids, sampled functions, box domains and function presets.

The flat torus [0, L)^dim stands in for R^n. Nodes sit at x_i = i*h with
h = L / n_points, and every integral is the rectangle rule on these nodes.
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    dim: int
    n_points: int
    box_length: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = self.n_points
        if n < 8 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def h(self) -> float:
        return self.box_length / self.n_points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_points,) * self.dim

    @property
    def size(self) -> int:
        return self.n_points ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def axes(self) -> list[np.ndarray]:
        return [np.arange(self.n_points) * self.h for _ in range(self.dim)]

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``grid.shape + (dim,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.n_points * factor, self.box_length)

    def with_resolution(self, n_points: int) -> "Grid":
        return Grid(self.dim, n_points, self.box_length)


class SampledFunction:
    """Real values on the nodes of a :class:`Grid`. Immutable."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=np.float64)
        if arr.size != grid.size:
            raise ValueError(f"expected {grid.size} values, got {arr.size}")
        arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("sampled function has non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SampledFunction is immutable")

    def __repr__(self):
        return f"SampledFunction({self.grid}, max|u|={np.max(np.abs(self.values)):.3g})"

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def _coerce(self, other):
        if isinstance(other, SampledFunction):
            if other.grid != self.grid:
                raise ValueError("grids differ")
            return other.values
        return other

    def __add__(self, other):
        return SampledFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SampledFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return SampledFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return SampledFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def l2_norm(self) -> float:
        return math.sqrt(float(np.sum(self.values ** 2)) * self.grid.cell_volume)

    def lp_norm(self, p: float) -> float:
        return float(np.sum(np.abs(self.values) ** p) * self.grid.cell_volume) ** (1.0 / p)

    # -- serialization ---------------------------------------------------
    # binary layout: <i4 dim, <i4 n_points, <f8 box_length, then <f8 values (C order)

    def to_bytes(self) -> bytes:
        g = self.grid
        header = struct.pack("<iid", g.dim, g.n_points, g.box_length)
        return header + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "SampledFunction":
        if len(data) < 16:
            raise ValueError("truncated header")
        dim, n, length = struct.unpack("<iid", data[:16])
        grid = Grid(dim, n, length)
        body = data[16:]
        if len(body) != 8 * grid.size:
            raise ValueError(f"payload has {len(body)} bytes, expected {8 * grid.size}")
        return cls(grid, np.frombuffer(body, dtype="<f8"))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SampledFunction":
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        coord_names = ["x", "y"][: self.grid.dim]
        writer.writerow(["index", *coord_names, "value"])
        coords = self.grid.coordinates().reshape(-1, self.grid.dim)
        for i, (c, v) in enumerate(zip(coords, self.flat)):
            writer.writerow([i, *(repr(float(ci)) for ci in c), repr(float(v))])
        return buf.getvalue()


@dataclass(frozen=True)
class Box:
    """Half-open axis-aligned box ``[lo, hi)``; an interval in 1D."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(a) for a in np.atleast_1d(self.lo))
        hi = tuple(float(b) for b in np.atleast_1d(self.hi))
        if len(lo) != len(hi):
            raise ValueError("lo and hi dimensions differ")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError(f"empty box {lo}..{hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def interval(cls, a: float, b: float) -> "Box":
        return cls((a,), (b,))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(0.5 * (a + b) for a, b in zip(self.lo, self.hi))

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def diam(self) -> float:
        return math.sqrt(sum(w * w for w in self.sides))

    @property
    def volume(self) -> float:
        return math.prod(self.sides)

    def scaled(self, lam: float) -> "Box":
        """Concentric box with every side multiplied by ``lam``."""
        c = self.center
        half = [0.5 * lam * w for w in self.sides]
        return Box(tuple(ci - hw for ci, hw in zip(c, half)), tuple(ci + hw for ci, hw in zip(c, half)))

    def contains_box(self, other: "Box", tol: float = 1e-12) -> bool:
        return all(a - tol <= oa and ob <= b + tol
                   for a, b, oa, ob in zip(self.lo, self.hi, other.lo, other.hi))

    def inside_torus(self, grid: Grid, tol: float = 1e-12) -> bool:
        return all(a >= -tol and b <= grid.box_length + tol for a, b in zip(self.lo, self.hi))

    def is_aligned(self, grid: Grid) -> bool:
        h = grid.h
        ends = np.array(self.lo + self.hi) / h
        return bool(np.all(np.abs(ends - np.round(ends)) <= _ALIGN_TOL * max(1.0, np.max(np.abs(ends)))))

    def snapped(self, grid: Grid) -> "Box":
        """Round endpoints to the nearest grid multiples."""
        h = grid.h
        return Box(tuple(round(a / h) * h for a in self.lo), tuple(round(b / h) * h for b in self.hi))

    def overlaps(self, other: "Box") -> bool:
        return all(a < ob and oa < b for a, b, oa, ob in zip(self.lo, self.hi, other.lo, other.hi))

    def mask(self, grid: Grid) -> np.ndarray:
        if self.dim != grid.dim:
            raise ValueError("box and grid dimensions differ")
        h = grid.h
        parts = []
        for a, b in zip(self.lo, self.hi):
            idx = np.arange(grid.n_points)
            lo_i, hi_i = round(a / h), round(b / h)
            parts.append((idx >= lo_i) & (idx < hi_i))
        m = parts[0]
        for extra in parts[1:]:
            m = np.logical_and.outer(m, extra)
        return m


@dataclass(frozen=True)
class Domain:
    """Finite union of pairwise-disjoint boxes inside the periodic box."""

    boxes: tuple[Box, ...] = field(default_factory=tuple)

    def __post_init__(self):
        boxes = tuple(self.boxes)
        object.__setattr__(self, "boxes", boxes)
        for i, a in enumerate(boxes):
            for b in boxes[i + 1:]:
                if a.overlaps(b):
                    raise ValueError(f"domain boxes overlap: {a} and {b}")

    @classmethod
    def full(cls, grid: Grid) -> "Domain":
        return cls((Box((0.0,) * grid.dim, (grid.box_length,) * grid.dim),))

    @classmethod
    def interval(cls, a: float, b: float) -> "Domain":
        return cls((Box.interval(a, b),))

    @classmethod
    def of(cls, *boxes: Box) -> "Domain":
        return cls(tuple(boxes))

    @property
    def is_empty(self) -> bool:
        return len(self.boxes) == 0

    def validate(self, grid: Grid) -> None:
        if self.is_empty:
            raise ValueError("empty domain")
        for b in self.boxes:
            if b.dim != grid.dim:
                raise ValueError(f"box {b} has wrong dimension for {grid}")
            if not b.inside_torus(grid):
                raise ValueError(f"box {b} leaves the periodic box [0, {grid.box_length})")
            if not b.is_aligned(grid):
                raise ValueError(f"box {b} is not aligned to grid spacing {grid.h}")

    def mask(self, grid: Grid) -> np.ndarray:
        self.validate(grid)
        m = np.zeros(grid.shape, dtype=bool)
        for b in self.boxes:
            m |= b.mask(grid)
        if not m.any():
            raise ValueError("domain contains no grid nodes")
        return m

    def measure(self, grid: Grid) -> float:
        return float(np.count_nonzero(self.mask(grid))) * grid.cell_volume


def as_mask(grid: Grid, domain) -> np.ndarray:
    """Boolean node mask for a Domain, Box, mask array or ``None`` (whole torus)."""
    if domain is None:
        return np.ones(grid.shape, dtype=bool)
    if isinstance(domain, Box):
        domain = Domain.of(domain)
    if isinstance(domain, Domain):
        return domain.mask(grid)
    m = np.asarray(domain, dtype=bool)
    if m.shape != grid.shape:
        raise ValueError("mask shape does not match grid")
    return m


@dataclass(frozen=True)
class FracParams:
    """Exponent bundle: order ``s``, integrability ``p``, shift ``eps``, Riesz order ``t``."""

    s: float
    p: float
    eps: float = 0.0
    t: float | None = None
    dim: int = 1

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.p >= 2 or not math.isfinite(self.p):
            raise ValueError(f"p must lie in [2, inf), got {self.p}")
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.t is not None and not 0 < self.t < self.dim:
            raise ValueError(f"t must lie in (0, {self.dim}), got {self.t}")

    def check_shift(self) -> None:
        if not self.s + self.eps < 1:
            raise ValueError(f"s + eps = {self.s + self.eps} must be < 1")

    def check_commutator(self) -> None:
        self.check_shift()
        t = self.t if self.t is not None else (self.dim - self.eps * self.p) / 2
        if not 0 < t < self.dim or not t + self.eps * self.p < self.dim:
            raise ValueError(f"t + eps*p = {t + self.eps * self.p} must be < dim = {self.dim}")


def mean_value(u: SampledFunction, domain=None) -> float:
    """Average of ``u`` over ``domain`` by the grid rectangle rule."""
    if isinstance(domain, Domain) and domain.is_empty:
        raise ValueError("empty domain")
    m = as_mask(u.grid, domain)
    count = np.count_nonzero(m)
    if count == 0:
        raise ValueError("empty domain")
    vol = u.grid.cell_volume
    return float(np.sum(u.values[m]) * vol) / (count * vol)


# -- presets ----------------------------------------------------------------

def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _check_support(grid: Grid, center: Sequence[float], radius: float) -> None:
    for c in center:
        if c - radius < 0 or c + radius > grid.box_length:
            raise ValueError(f"support [{c - radius}, {c + radius}] leaves the box [0, {grid.box_length}]")


def _center(grid: Grid, params) -> tuple[float, ...]:
    c = params.get("center", grid.box_length / 2)
    c = tuple(float(x) for x in np.atleast_1d(c))
    if len(c) == 1 and grid.dim == 2:
        c = c * 2
    return c


def gaussian_bump(grid: Grid, center, width: float, radius: float, amplitude: float = 1.0) -> np.ndarray:
    """Gaussian of standard deviation ``width`` smoothly cut off to zero at ``radius``."""
    if width <= 0 or radius <= 0:
        raise ValueError("width and radius must be positive")
    _check_support(grid, center, radius)
    x = grid.coordinates()
    r2 = np.sum((x - np.asarray(center)) ** 2, axis=-1)
    r = np.sqrt(r2)
    cut = 1.0 - smooth_step(2.0 * r / radius - 1.0)
    return amplitude * np.exp(-r2 / (2 * width * width)) * cut


def hat(grid: Grid, center, radius: float, amplitude: float = 1.0) -> np.ndarray:
    if radius <= 0:
        raise ValueError("radius must be positive")
    _check_support(grid, center, radius)
    x = grid.coordinates()
    out = np.ones(grid.shape)
    for a in range(grid.dim):
        out = out * np.maximum(0.0, 1.0 - np.abs(x[..., a] - center[a]) / radius)
    return amplitude * out


def random_trig(grid: Grid, seed: int, n_modes: int = 4, decay: float = 2.0, amplitude: float = 1.0) -> np.ndarray:
    """Finite Fourier sum with coefficients drawn from ``default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    x = grid.coordinates()
    w = 2 * np.pi / grid.box_length
    out = np.zeros(grid.shape)
    if grid.dim == 1:
        modes = [(k,) for k in range(1, n_modes + 1)]
    else:
        modes = [(k1, k2) for k1 in range(0, n_modes + 1) for k2 in range(-n_modes, n_modes + 1)
                 if (k1, k2) > (0, 0) and max(abs(k1), abs(k2)) <= n_modes]
    for k in modes:
        a, b = rng.standard_normal(2)
        scale = amplitude * math.hypot(*k) ** (-decay)
        phase = w * sum(ki * x[..., i] for i, ki in enumerate(k))
        out += scale * (a * np.cos(phase) + b * np.sin(phase))
    return out


PRESETS = ("constant", "sine", "gaussian_bump", "hat", "random_trig")


def make_preset(name: str, grid: Grid, params: dict | None = None) -> SampledFunction:
    """Build one of the named test functions on ``grid``.

    ``constant``: value. ``sine``: k, amplitude, axis. ``gaussian_bump``:
    center, width, radius, amplitude. ``hat``: center, radius, amplitude.
    ``random_trig``: seed (required), n_modes, decay, amplitude.
    """
    params = dict(params or {})
    if name == "constant":
        vals = np.full(grid.shape, float(params.get("value", 1.0)))
    elif name == "sine":
        k = float(params.get("k", 1))
        axis = int(params.get("axis", 0))
        x = grid.coordinates()[..., axis]
        vals = float(params.get("amplitude", 1.0)) * np.sin(2 * np.pi * k * x / grid.box_length)
    elif name == "gaussian_bump":
        L = grid.box_length
        vals = gaussian_bump(grid, _center(grid, params), float(params.get("width", L / 16)),
                             float(params.get("radius", L / 4)), float(params.get("amplitude", 1.0)))
    elif name == "hat":
        vals = hat(grid, _center(grid, params), float(params.get("radius", grid.box_length / 4)),
                   float(params.get("amplitude", 1.0)))
    elif name == "random_trig":
        if "seed" not in params:
            raise ValueError("random_trig needs an explicit seed")
        vals = random_trig(grid, int(params["seed"]), int(params.get("n_modes", 4)),
                           float(params.get("decay", 2.0)), float(params.get("amplitude", 1.0)))
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return SampledFunction(grid, vals)
