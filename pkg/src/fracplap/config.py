"""Experiment configuration: a sectioned key = value text file.

Example::

    [run]
    command = commutator-sweep
    seed = 7

    [grid]
    dim = 1
    n_points = 512
    box_length = 12.566370614359172

    [params]
    s = 0.5
    p = 2
    eps_list = 0.01, 0.02, 0.04, 0.08

    [u]
    preset = random_trig
    seed = 101

    [domain]
    boxes = 0.25:0.75

Boxes are ``a:b`` in 1D and ``a:b x c:d`` in 2D, separated by ``;``.
Box endpoints and the preset keys center, width and radius are in units of
the box length.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .grid import PRESETS, Box, Domain, Grid, SampledFunction, make_preset

COMMANDS = ("seminorm", "pairing", "commutator-sweep", "logpot", "lp-equiv", "solve", "probe",
            "poincare", "caccioppoli")

FUNCTION_SECTIONS = ("u", "phi", "f", "g")
_LENGTH_KEYS = ("center", "width", "radius")

_DEFAULTS = {
    "s": 0.5, "p": 2.0, "eps": 0.0, "t": None, "c_mode": "analytic", "eps_list": None,
    "alpha": None, "beta": None, "gamma": None, "lambda": 2.0, "delta": 0.5,
    "tol": 1e-8, "max_iter": 20000, "test_size": 32, "refine": 2,
}


class ConfigError(ValueError):
    """A config value is malformed or breaks a hypothesis; ``problems`` lists every finding."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class Config:
    command: str
    seed: int | None
    grid: Grid
    params: dict
    functions: dict = field(default_factory=dict)
    domains: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """The fully resolved configuration, defaults included."""
        out = {
            "command": self.command,
            "seed": self.seed,
            "grid": {"dim": self.grid.dim, "n_points": self.grid.n_points, "box_length": self.grid.box_length},
            "params": dict(self.params),
            "functions": {k: dict(v) for k, v in self.functions.items()},
            "domains": {k: [[list(b.lo), list(b.hi)] for b in d.boxes] for k, d in self.domains.items()},
        }
        return out

    def function(self, name: str, grid: Grid | None = None) -> SampledFunction:
        grid = grid or self.grid
        sec = dict(self.functions[name])
        preset = sec.pop("preset")
        L = grid.box_length
        for key in _LENGTH_KEYS:
            if key in sec:
                v = sec[key]
                sec[key] = [c * L for c in v] if isinstance(v, list) else v * L
        return make_preset(preset, grid, sec)

    def domain(self, name: str) -> Domain:
        return self.domains[name]


def _num(text: str):
    v = float(text)
    if v.is_integer() and "." not in text and "e" not in text.lower():
        return int(v)
    return v


def _value(text: str):
    text = text.strip()
    if "," in text:
        return [float(t) for t in text.split(",") if t.strip()]
    try:
        return _num(text)
    except ValueError:
        return text


def parse_boxes(text: str, dim: int, L: float) -> Domain:
    boxes = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        axes = [a.strip() for a in part.split("x")]
        if len(axes) != dim:
            raise ValueError(f"box {part!r} has {len(axes)} axes, grid has {dim}")
        lo, hi = [], []
        for a in axes:
            a0, a1 = a.split(":")
            lo.append(float(a0) * L)
            hi.append(float(a1) * L)
        boxes.append(Box(tuple(lo), tuple(hi)))
    return Domain(tuple(boxes))


def load(path, seed: int | None = None, resolution: int | None = None) -> Config:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    return from_parser(cp, seed, resolution)


def loads(text: str, seed: int | None = None, resolution: int | None = None) -> Config:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    return from_parser(cp, seed, resolution)


def from_parser(cp: configparser.ConfigParser, seed=None, resolution=None) -> Config:
    problems = []
    raw = {s: dict(cp[s]) for s in cp.sections()}
    run = raw.get("run", {})
    command = run.get("command", "").strip()
    if command not in COMMANDS:
        problems.append(f"[run] command must be one of {', '.join(COMMANDS)}; got {command!r}")
    run_seed = seed if seed is not None else (int(run["seed"]) if "seed" in run else None)

    g = raw.get("grid", {})
    grid = None
    try:
        n = int(resolution if resolution is not None else g.get("n_points", 256))
        grid = Grid(int(g.get("dim", 1)), n, float(g.get("box_length", 1.0)))
    except (ValueError, TypeError) as exc:
        problems.append(f"[grid] {exc}")

    params = dict(_DEFAULTS)
    for k, v in raw.get("params", {}).items():
        params[k] = _value(v)

    functions = {}
    for name in FUNCTION_SECTIONS:
        if name in raw:
            sec = {k: _value(v) for k, v in raw[name].items()}
            if sec.get("preset") not in PRESETS:
                problems.append(f"[{name}] preset must be one of {', '.join(PRESETS)}")
            if sec.get("preset") == "random_trig" and "seed" not in sec:
                if run_seed is None:
                    problems.append(f"[{name}] random_trig needs a seed")
                else:
                    sec["seed"] = run_seed
            for key in ("center",):
                if key in sec and not isinstance(sec[key], list):
                    sec[key] = [float(sec[key])]
            functions[name] = sec

    domains = {}
    if grid is not None:
        for k, v in raw.get("domain", {}).items():
            try:
                d = parse_boxes(v, grid.dim, grid.box_length)
                d.validate(grid)
                domains[k] = d
            except ValueError as exc:
                problems.append(f"[domain] {k}: {exc}")
    if problems:
        raise ConfigError(problems)
    return Config(command, run_seed, grid, params, functions, domains, raw)


# -- hypothesis checks --------------------------------------------------------

def _in(v, lo, hi, lo_open=True, hi_open=True) -> bool:
    if v is None or not isinstance(v, (int, float)) or not math.isfinite(v):
        return False
    ok_lo = v > lo if lo_open else v >= lo
    ok_hi = v < hi if hi_open else v <= hi
    return ok_lo and ok_hi


def check(cfg: Config) -> list[str]:
    """Every violated hypothesis, each with the result it comes from. Empty means ok."""
    out = []
    P = cfg.params
    n = cfg.grid.dim
    s, p = P.get("s"), P.get("p")
    cmd = cfg.command
    if cmd != "logpot" and not _in(s, 0, 1):
        out.append(f"s = {s} must lie in (0, 1) (fractional order; standing assumption s in (0,1))")
    if cmd in ("logpot", "lp-equiv", "poincare"):
        if not _in(p, 1, math.inf):
            out.append(f"p = {p} must lie in (1, inf)")
    elif not _in(p, 2, math.inf, lo_open=False):
        out.append(f"p = {p} must lie in [2, inf) (commutator theorem and operator class: p >= 2)")
    eps_vals = P.get("eps_list") or ([P.get("eps")] if P.get("eps") is not None else [])
    if not isinstance(eps_vals, list):
        eps_vals = [eps_vals]
    if cmd in ("commutator-sweep", "probe"):
        if not eps_vals:
            out.append("eps_list is required")
        for e in eps_vals:
            if not _in(e, 0, math.inf, lo_open=False):
                out.append(f"eps = {e} must be >= 0")
            elif _in(s, 0, 1) and not s + e < 1:
                out.append(f"s + eps = {s + e} must be < 1 (shifted order s + eps stays fractional)")
    if cmd == "commutator-sweep" and _in(p, 2, math.inf, lo_open=False):
        t = P.get("t")
        for e in eps_vals:
            if not isinstance(e, (int, float)):
                continue
            tt = t if t is not None else (n - e * p) / 2
            if not _in(tt, 0, n) or not tt + e * p < n:
                out.append(f"t + eps*p = {tt + e * p} must be < dim = {n} with t in (0, dim) "
                           f"(kernel admissibility of the commutator proof kernels, t = {tt}, eps = {e})")
        if P.get("c_mode") not in ("analytic", "calibrated"):
            out.append(f"c_mode must be analytic or calibrated, got {P.get('c_mode')!r}")
    if cmd == "probe":
        for e in eps_vals:
            if isinstance(e, (int, float)) and _in(s, 0, 1) and not s - e * (p - 1) > 0:
                out.append(f"s - eps(p-1) = {s - e * (p - 1)} must be > 0 "
                           "(dual-space order of the higher differentiability theorem)")
    if cmd == "logpot":
        a, b, gm = P.get("alpha"), P.get("beta"), P.get("gamma")
        if not _in(a, 0, n):
            out.append(f"alpha = {a} must lie in (0, {n}) (log-potential lemma)")
        if not _in(b, 0, n):
            out.append(f"beta = {b} must lie in (0, {n}) (log-potential lemma)")
        if not _in(gm, 0, 1):
            out.append(f"gamma = {gm} must lie in (0, 1) (log-potential lemma)")
        if all(isinstance(v, (int, float)) for v in (a, b, gm)) and not _in(gm + b - a, 0, 1):
            out.append(f"gamma + beta - alpha = {gm + b - a} must lie in (0, 1) "
                       "(log-potential lemma hypothesis on s := gamma + beta - alpha)")
        if n != 1:
            out.append("logpot is implemented for dim = 1 only")
    if cmd == "poincare" and not _in(P.get("lambda"), 1, math.inf, lo_open=False):
        out.append(f"lambda = {P.get('lambda')} must be >= 1 (Poincare inequality on lambda B)")
    if cmd == "caccioppoli" and not _in(P.get("delta"), 0, math.inf):
        out.append(f"delta = {P.get('delta')} must be > 0 (Caccioppoli-type estimate)")
    if cmd in ("solve", "probe"):
        if not _in(P.get("tol"), 0, math.inf):
            out.append(f"tol = {P.get('tol')} must be > 0")
        if "omega" not in cfg.domains:
            out.append("[domain] omega is required")
        if cmd == "probe" and "omega1" not in cfg.domains:
            out.append("[domain] omega1 is required")
        if "omega" in cfg.domains and "omega1" in cfg.domains:
            om, om1 = cfg.domains["omega"], cfg.domains["omega1"]
            if not all(any(b.contains_box(c) for b in om.boxes) for c in om1.boxes):
                out.append("omega1 must lie strictly inside omega (higher differentiability theorem)")
    needed = {
        "seminorm": ("u",), "pairing": ("u", "phi"), "commutator-sweep": ("u", "phi"),
        "logpot": ("phi",), "lp-equiv": ("u",), "solve": ("f",), "probe": ("f",),
        "poincare": ("u",), "caccioppoli": ("u",),
    }.get(cmd, ())
    for name in needed:
        if name not in cfg.functions:
            out.append(f"[{name}] section is required for {cmd}")
    if cmd in ("commutator-sweep", "poincare", "caccioppoli") and "ball" not in cfg.domains:
        out.append(f"[domain] ball is required for {cmd}")
    return out
