"""Command-line driver: ``fracplap SUBCOMMAND --config PATH --out DIR``.

Exit codes: 0 success, 2 invalid configuration (nothing written), 3 a NaN or
infinity turned up in the results (the report is still written).
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import _pairs, config as cfgmod
from .commutator import LogKernelParams, eps_sweep_experiment, log_potential_A
from .grid import FracParams, SampledFunction, gaussian_bump, random_trig
from .pairing import TestSpace, plap_pairing
from .report import ExperimentReport
from .sobolev import gagliardo_seminorm, poincare_check
from .solver import DirichletProblem, caccioppoli_check, differentiability_probe, solve
from .spectral import FilterBank, lp_project, triebel_norm

log = logging.getLogger("fracplap")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


def _list(v) -> list[float]:
    if v is None:
        return []
    return [float(x) for x in v] if isinstance(v, list) else [float(v)]


def _sp(c):
    return float(c.params["s"]), float(c.params["p"])


def run_seminorm(c, rep):
    s, p = _sp(c)
    u = c.function("u")
    dom = c.domains.get("omega")
    r = gagliardo_seminorm(u, dom, s, p)
    t = rep.new_table("seminorm", [("n_points", "1"), ("s", "1"), ("p", "1"), ("seminorm", "W^{s,p}"),
                                   ("seminorm_p", "W^{s,p} to the p")])
    t.add(c.grid.n_points, s, p, r.value, r.value_p)


def run_pairing(c, rep):
    s, p = _sp(c)
    u, phi = c.function("u"), c.function("phi")
    dom = c.domains.get("omega")
    v = plap_pairing(u, phi, dom, s, p).value
    t = rep.new_table("pairing", [("n_points", "1"), ("s", "1"), ("p", "1"), ("pairing", "pairing units")])
    t.add(c.grid.n_points, s, p, v)


def run_commutator(c, rep):
    s, p = _sp(c)
    P = c.params
    u, phi = c.function("u"), c.function("phi")
    ball = c.domain("ball")
    probes = None
    if P["c_mode"] == "calibrated":
        probes = calibration_probes(c.grid, ball.boxes[0], c.seed or 0)
    eps_sweep_experiment(u, phi, ball, s, p, _list(P["eps_list"]), P["c_mode"], P["t"], probes, rep)
    sweep = rep.table("commutator_sweep")
    rep.config_echo["resolved"] = {"t": sweep.column("t"), "c_value": sweep.column("c_value"),
                                   "c_mode": P["c_mode"]}


def calibration_probes(grid, box, seed, count=4):
    """Seeded (random_trig, bump in box) pairs, drawn from seeds the test pair does not use."""
    center, half = box.center, min(box.sides) / 2
    out = []
    for k in range(count):
        pu = SampledFunction(grid, random_trig(grid, seed + 1000 + k, 4))
        radius = half * (0.5 + 0.15 * k)
        pphi = SampledFunction(grid, gaussian_bump(grid, center, radius / 3, radius))
        out.append((pu, pphi))
    return out


def run_logpot(c, rep):
    P = c.params
    p = float(P["p"])
    lk = LogKernelParams(float(P["alpha"]), float(P["beta"]), float(P["gamma"]), c.grid.dim)
    phi = c.function("phi")
    a = log_potential_A(phi, lk, p)
    semi = gagliardo_seminorm(phi, None, lk.s, p).value
    t = rep.new_table("logpot", [("n_points", "1"), ("s", "1"), ("A", "1"), ("seminorm", "W^{s,p}(torus)"),
                                 ("ratio", "1")])
    t.add(c.grid.n_points, lk.s, a, semi, a / semi if semi > 0 else float("nan"))


def run_lp_equiv(c, rep):
    s, p = _sp(c)
    u = c.function("u")
    bank = FilterBank.for_grid(c.grid)
    dec = lp_project(u, bank)
    err = (dec.reconstruct() - u).l2_norm() / max(u.l2_norm(), 1e-300)
    tri = triebel_norm(u, s, p, bank)
    gag = gagliardo_seminorm(u, None, s, p).value
    t = rep.new_table("lp_equivalence", [("n_points", "1"), ("s", "1"), ("p", "1"),
                                         ("reconstruction_error", "relative L2"), ("triebel_norm", "F^s_{p,p}"),
                                         ("gagliardo_seminorm", "W^{s,p}(torus)"), ("ratio", "1")])
    t.add(c.grid.n_points, s, p, err, tri, gag, tri / gag if gag > 0 else float("nan"))


def _problem(c, grid=None):
    grid = grid or c.grid
    s, p = _sp(c)
    f = c.function("f", grid)
    g = c.function("g", grid) if "g" in c.functions else SampledFunction(grid, np.zeros(grid.shape))
    return DirichletProblem(c.domain("omega"), f, g, FracParams(s, p, dim=grid.dim))


def run_solve(c, rep):
    P = c.params
    prob = _problem(c)
    ts = TestSpace(float(P["s"]), int(P["test_size"]), c.seed or 0)
    st = solve(prob, float(P["tol"]), int(P["max_iter"]), test_space=ts)
    t = rep.new_table("solve", [("n_points", "1"), ("iterations", "1"), ("converged", "bool"),
                                ("energy", "energy units"), ("relative_gradient", "1"),
                                ("dual_residual", "dual W_0^{s,p}(Omega)")])
    t.add(c.grid.n_points, st.iteration, int(st.converged), st.energy, st.grad_norm, st.dual_residual)
    h = rep.new_table("energy_history", [("iteration", "1"), ("energy", "energy units")])
    for i, e in enumerate(st.energies):
        h.add(i, e)
    rep.notes.append(st.message)
    rep.extra_files["solution.bin"] = st.u.to_bytes()
    return prob, st


def run_probe(c, rep):
    P = c.params
    prob, st = run_solve(c, rep)
    fine = c.grid.refined(int(P["refine"]))
    prob2 = _problem(c, fine)
    ts = TestSpace(float(P["s"]), int(P["test_size"]), c.seed or 0)
    st2 = solve(prob2, float(P["tol"]), int(P["max_iter"]), test_space=ts)
    rep.table("solve").add(fine.n_points, st2.iteration, int(st2.converged), st2.energy, st2.grad_norm,
                           st2.dual_residual)
    rep.measurements.remove(rep.table("energy_history"))
    differentiability_probe(prob, st.u, c.domain("omega1"), _list(P["eps_list"]), refined=(prob2, st2.u),
                            test_size=int(P["test_size"]), seed=c.seed or 0, report=rep)


def run_poincare(c, rep):
    s, p = _sp(c)
    u = c.function("u")
    lam = float(c.params["lambda"])
    r = poincare_check(u, c.domain("ball"), lam, s, p)
    t = rep.new_table("poincare", [("n_points", "1"), ("lambda", "1"), ("lhs", "L^p to the p"),
                                   ("rhs", "L^p to the p"), ("ratio", "1")])
    t.add(c.grid.n_points, lam, r.lhs, r.rhs, r.ratio)


def run_caccioppoli(c, rep):
    s, p = _sp(c)
    u = c.function("u")
    delta = float(c.params["delta"])
    ts = TestSpace(s, int(c.params["test_size"]), c.seed or 0)
    r = caccioppoli_check(u, c.domain("ball"), s, p, delta, ts)
    t = rep.new_table("caccioppoli", [("n_points", "1"), ("delta", "1"), ("lhs", "W^{s,p}(B) to the p"),
                                      ("delta_term", "1"), ("sup_term", "1"), ("oscillation_term", "1"),
                                      ("satisfied_constant", "1")])
    rp = r.rhs_parts
    t.add(c.grid.n_points, delta, r.lhs, rp["delta_term"], rp["sup_term"], rp["oscillation_term"],
          r.satisfied_constant)


RUNNERS = {
    "seminorm": run_seminorm, "pairing": run_pairing, "commutator-sweep": run_commutator,
    "logpot": run_logpot, "lp-equiv": run_lp_equiv, "solve": run_solve, "probe": run_probe,
    "poincare": run_poincare, "caccioppoli": run_caccioppoli,
}


def _load(args):
    c = cfgmod.load(args.config, seed=args.seed, resolution=args.resolution)
    if c.command != args.command:
        raise cfgmod.ConfigError([f"config command {c.command!r} does not match subcommand {args.command!r}"])
    problems = cfgmod.check(c)
    if problems:
        raise cfgmod.ConfigError(problems)
    return c


def cmd_validate(args) -> int:
    try:
        c = cfgmod.load(args.config, seed=args.seed, resolution=args.resolution)
        problems = cfgmod.check(c)
    except cfgmod.ConfigError as exc:
        problems = exc.problems
    except (OSError, ValueError) as exc:
        problems = [str(exc)]
    if problems:
        for msg in problems:
            print(f"violated: {msg}")
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        c = _load(args)
    except (cfgmod.ConfigError, OSError, ValueError) as exc:
        problems = getattr(exc, "problems", [str(exc)])
        for msg in problems:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    rep = ExperimentReport(c.command, c.echo())
    rep.config_echo["threads"] = args.threads
    rep.stamp(c.seed, c.grid)
    try:
        with _pairs.threads(args.threads):
            RUNNERS[c.command](c, rep)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    bad = rep.non_finite()
    rep.write(args.out)
    if bad:
        print(f"error: non-finite values in {', '.join(bad)}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracplap", description="Fractional p-Laplacian experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in list(RUNNERS) + ["validate"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--resolution", type=int, default=None, help="override grid n_points")
        if name != "validate":
            sp.add_argument("--out", required=True, help="output directory")
            sp.add_argument("--threads", type=int, default=1, help="worker threads for pair sums")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "validate":
        return cmd_validate(args)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
