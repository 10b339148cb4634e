"""Command-line front end.

``graphheat <subcommand> --config <path> [--out <dir>] [--seed <u64>]`` or
``--preset <name>`` for a bundled configuration.  Exit codes: 0 success,
2 verification failure, 3 precondition refusal, 4 configuration error.
"""

from __future__ import annotations

import argparse
import copy
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .barriers import (BarrierError, antitree_shell_laplacian, barrier_antitree, barrier_lattice,
                       barrier_thm34, barrier_thm35, barrier_z2_static, certify_elliptic,
                       certify_parabolic, certify_with_core, lift_static, search_minimal_q,
                       thm34_threshold)
from .calculus import check_integration_by_parts, lattice_neighbor_sums, laplacian, radial_laplacian
from .cauchy import HeatProblem, residual_check, solve_backward_euler, solve_spectral
from .exhaustion import (ExhaustionError, PreconditionRefused, nonuniqueness_exhibit, run_exhaustion,
                         run_exhaustion_with_boundary, time_derivative_bound_check, validate_initial)
from .graph_core import (GraphError, Lattice, NotWeaklySymmetric, WeightedGraph,
                         _ShellFamily, extract_radial_profile, materialize_ball, radial_region,
                         symmetry_audit)
from .io_utils import checked, format_vertex, line_chart_svg, write_json, write_rows
from .maximum_principle import operator_residual
from .spectral import dirichlet_spectrum, eigen_residual

EXIT_OK, EXIT_FAIL, EXIT_REFUSED, EXIT_CONFIG = 0, 2, 3, 4
IDENTITY_RTOL = 1e-12


class _Corrupted(WeightedGraph):
    """Wraps a graph and perturbs one edge weight or one vertex measure (self-test only)."""

    def __init__(self, base: WeightedGraph, what: str):
        self.base, self.what = base, what
        self.root = base.root
        self.family = base.family
        self.target = base.neighbors(base.root)[0][0]

    def vertex(self, x):
        return self.base.vertex(x)

    def neighbors(self, x):
        out = self.base.neighbors(x)
        if self.what == "weight" and tuple(x) == tuple(self.root):
            out = [(y, w * (1.0 + 1e-6) if i == 0 else w) for i, (y, w) in enumerate(out)]
        return out

    def measure(self, x):
        mu = self.base.measure(x)
        return mu * 1.5 if self.what == "measure" and tuple(x) == tuple(self.target) else mu

    def descriptor(self):
        return {**self.base.descriptor(), "corrupted": self.what}


def _region(g, radius, metric="combinatorial"):
    return materialize_ball(g, None, radius, metric)


def _print(msg):
    print(msg, file=sys.stderr)


# --------------------------------------------------------------------------
# identities


def cmd_identities(cfg: dict, out: Path, rng: np.random.Generator) -> int:
    p = cfg.get("params", {})
    g = cfgmod.build_graph(cfg["graph"])
    if cfg.get("self_test_corrupt"):
        g = _Corrupted(g, cfg["self_test_corrupt"])
    radius = p.get("radius", 4)
    rows = []

    def row(check, case, residual, tol):
        rows.append([check, case, float(residual), float(tol), bool(residual <= tol)])

    region = _region(g, radius)
    bad = symmetry_audit(g, region.interior)
    row("symmetry", f"{len(region.interior)} vertices", float(len(bad)), 0.0)
    for x, y, w, back in bad[:5]:
        _print(f"symmetry violation: w{format_vertex(x)}->{format_vertex(y)} = {w!r}, reverse {back!r}")

    for s in range(p.get("samples", 20)):
        f = {x: 0.0 for x in region.closure}
        for x in region.interior:
            f[x] = float(rng.standard_normal())
        hv = {x: float(rng.standard_normal()) for x in region.closure}
        res = check_integration_by_parts(g, region, lambda x: f[tuple(x)], lambda x: hv[tuple(x)])
        scale = max(abs(v) for v in f.values()) * max(abs(v) for v in hv.values()) * \
            float(np.sum(region.degree)) + 1e-300
        row("summation_by_parts", f"pair {s}", res / scale, IDENTITY_RTOL)

    if isinstance(g, Lattice):
        for _ in range(p.get("points", 1000)):
            x = tuple(int(c) for c in rng.integers(-10 ** 6, 10 ** 6, size=g.n))
            s1, s2 = lattice_neighbor_sums(g.n, x)
            exact1, exact2 = 2 * g.n, 8 * sum(c * c for c in x) + 2 * g.n
            row("lattice_neighbor_sums", format_vertex(x), float(abs(s1 - exact1) + abs(s2 - exact2)), 0.0)

    if isinstance(g, _ShellFamily) or isinstance(getattr(g, "base", None), _ShellFamily):
        max_shell = p.get("max_shell", 6)
        try:
            profile = extract_radial_profile(g, None, max_shell)
        except NotWeaklySymmetric as exc:
            row("weak_symmetry", f"shell {exc.shell}", 1.0, 0.0)
            _print(f"weak symmetry violation at shell {exc.shell}: {exc}")
            profile = None
        if profile is not None:
            row("weak_symmetry", f"shells 0..{max_shell}", 0.0, 0.0)
            db = profile.detailed_balance_residual()
            row("detailed_balance", f"shells 0..{max_shell - 1}", float(np.max(np.abs(db), initial=0.0)),
                IDENTITY_RTOL)
            fr = rng.standard_normal(max_shell + 1)
            ball = _region(g, max_shell)
            worst = 0.0
            for x, m in zip(ball.interior, ball.shell):
                full = laplacian(g, lambda y: fr[ball.shell[ball.index[tuple(y)]]], x)
                rad = radial_laplacian(profile, fr, int(m))
                worst = max(worst, abs(full - rad) / (1.0 + abs(full)))
            row("radial_reduction", f"shells 0..{max_shell - 1}", worst, IDENTITY_RTOL)

    write_rows(out / "identities.csv", ["check", "case", "residual", "tolerance", "pass"], rows)
    failed = sorted({r[0] for r in rows if not r[4]})
    for name in failed:
        _print(f"FAILED: {name}")
    return EXIT_FAIL if failed else EXIT_OK


# --------------------------------------------------------------------------
# spectrum and solve


def cmd_spectrum(cfg, out, rng) -> int:
    p = cfg.get("params", {})
    g = cfgmod.build_graph(cfg["graph"])
    rho = cfgmod.build_density(cfg.get("density"))
    region = _region(g, p.get("radius", 3), p.get("metric", "combinatorial"))
    w = rho.on_region(region)
    basis = dirichlet_spectrum(region, w, p.get("method", "lapack"))
    ortho = basis.orthonormality_error()
    resid = float(np.max(eigen_residual(region, w, basis)))
    scale = max(1.0, float(basis.eigenvalues[-1]))
    ok = basis.eigenvalues[0] > 0 and ortho <= 1e-10 and resid <= 1e-9 * scale
    write_rows(out / "spectrum.csv", ["index", "eigenvalue"],
               [[i, float(v)] for i, v in enumerate(basis.eigenvalues)])
    write_json(out / "spectrum.json", {
        "region": region.descriptor(), "size": basis.size, "method": p.get("method", "lapack"),
        "lambda_1": checked(float(basis.eigenvalues[0]), 0.0),
        "orthonormality_error": checked(ortho, 1e-10),
        "eigen_residual": checked(resid, 1e-9 * scale), "pass": bool(ok)})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve(cfg, out, rng) -> int:
    p = cfg.get("params", {})
    g = cfgmod.build_graph(cfg["graph"])
    rho = cfgmod.build_density(cfg.get("density"))
    region = _region(g, p.get("radius", 3), p.get("metric", "combinatorial"))
    u0 = cfgmod.build_initial(p.get("initial", {"type": "constant"}))
    init = u0.gamma + validate_initial(u0, region)[: region.n_interior]
    T, dt = p.get("T", 1.0), p.get("dt", 0.01)
    problem = HeatProblem.simple(region, rho.on_region(region), init, p.get("source", 0.0),
                                 p.get("boundary", 0.0), 0.0, T)
    if p.get("solver", "spectral") == "spectral":
        sol = solve_spectral(problem, dt=dt)
        res = residual_check(sol, problem)
    else:
        sol = solve_backward_euler(problem, dt)
        src = p.get("source", 0.0)
        res = float(np.nanmax(np.abs(operator_residual(region, problem.rho, sol.times, sol.values) - src)))
    tol = 1e-8 * max(1.0, problem.data_scale())
    sol.write_csv(out / "solution.csv")
    write_json(out / "solve.json", {"region": region.descriptor(), "solver": sol.representation,
                                    "steps": len(sol.times) - 1, "residual": checked(res, tol),
                                    "pass": bool(res <= tol)})
    return EXIT_OK if res <= tol else EXIT_FAIL


# --------------------------------------------------------------------------
# certify


def _certify_region(g, radius, metric):
    if isinstance(g, _ShellFamily):
        r = int(math.ceil(radius))
        return radial_region(extract_radial_profile(g, None, r), r)
    return _region(g, radius, metric)


def certify_config(cfg) -> tuple[bool, dict, list]:
    """Run the certificate described by a ``certify`` config; returns ``(passed, payload, extra_csv)``."""
    p = cfg.get("params", {})
    b = dict(p.get("barrier", {"family": "thm34"}))
    g = cfgmod.build_graph(cfg["graph"])
    rho = cfgmod.build_density(cfg.get("density"))
    fam = b.pop("family")
    nodes = p.get("time_nodes", 11)
    metric = p.get("metric", "euclidean" if fam in ("lattice", "z2_loglog") else "combinatorial")
    region = _certify_region(g, p.get("radius", 30), metric)
    extra = []
    payload = {"family": fam, "density": rho.descriptor(), "region": region.descriptor()}

    if fam == "thm34":
        A = b.get("A", 1.0)
        rho0 = b.get("rho0", rho.params.get("rho0", 1.0))
        Z = barrier_thm34(A, b.get("Q", "auto"), rho0)
        outer, full, q = certify_with_core(Z, rho, region, nodes)
        threshold = thm34_threshold(A, rho0)
        qs, _, trail = search_minimal_q(lambda q: barrier_thm34(A, q, rho0), rho, region, threshold / 8,
                                        n_times=nodes, min_shell=1)
        extra = [("q_search.csv", ["Q", "pass"], [[q_, ok] for q_, ok in trail])]
        passed = full is not None and full.passed
        payload.update({"threshold_Q": threshold, "initial_Q": Z.params["Q"], "final_Q": q,
                        "search_minimal_Q_off_seed": qs, "off_seed": outer.to_dict(),
                        "full": None if full is None else full.to_dict()})
    elif fam == "thm35":
        beta, rho0 = b.get("beta", 1.0), b.get("rho0", rho.params.get("rho0", 1.0))
        A, shift = b.get("A", rho0 / 2), b.get("log_shift", 1)
        make = lambda q: barrier_thm35(A, q, beta, rho0, shift)
        qs, outer, trail = search_minimal_q(make, rho, region, b.get("q_start", 1.0), n_times=nodes,
                                            min_shell=1)
        extra = [("q_search.csv", ["Q", "pass"], [[q_, ok] for q_, ok in trail])]
        full, q = None, None
        if qs is not None:
            _, full, q = certify_with_core(make(qs), rho, region, nodes)
        passed = full is not None and full.passed
        payload.update({"minimal_Q_off_seed": qs, "final_Q": q if passed else None,
                        "off_seed": outer.to_dict(), "full": None if full is None else full.to_dict()})
    elif fam == "lattice":
        alpha = b.get("alpha", rho.params.get("alpha", 0.0))
        A, beta = b.get("A", 1.0), b.get("beta", "auto")
        qs, cert, trail = search_minimal_q(lambda q: barrier_lattice(alpha, A, q, beta), rho, region,
                                           b.get("q_start", 1.0), n_times=nodes)
        extra = [("q_search.csv", ["Q", "pass"], [[q_, ok] for q_, ok in trail])]
        passed = qs is not None
        payload.update({"alpha": alpha, "minimal_Q": qs, "certificate": cert.to_dict()})
    elif fam == "z2_loglog":
        Zs = barrier_z2_static(b.get("K", "auto"), rho, b.get("scan_radius", 400))
        ell = certify_elliptic(Zs, rho, region, "le_rho")
        payload.update({"K": Zs.params["K"], "auto": Zs.params, "elliptic": ell.to_dict()})
        passed = ell.passed
        if passed:
            lifted = lift_static(Zs, b.get("gamma_factor", 2.0) / ell.min_value, ell)
            par = certify_parabolic(lifted, rho, region, (0.0, 1.0), nodes)
            payload["lifted"] = par.to_dict()
            passed = par.passed
    elif fam == "antitree_linear":
        K = b.get("K", 1.0)
        Zs = barrier_antitree(g, K)
        ell = certify_elliptic(Zs, rho, region, "le_rho")
        profile = extract_radial_profile(g, None, int(region.radius))
        lap = antitree_shell_laplacian(profile, K)
        rho_sh = rho.on_region(region)
        extra = [("antitree_shells.csv", ["shell", "laplacian", "rho", "pass"],
                  [[m, float(v), float(r), bool(v <= r)] for m, (v, r) in enumerate(zip(lap, rho_sh))])]
        passed = ell.passed
        payload.update({"K": K, "convention": g.convention, "elliptic": ell.to_dict()})
    else:
        raise cfgmod.ConfigError(f"unknown barrier family {fam!r}")
    payload["pass"] = bool(passed)
    return bool(passed), payload, extra


def cmd_certify(cfg, out, rng) -> int:
    passed, payload, extra = certify_config(cfg)
    write_json(out / "certificate.json", payload)
    for name, header, rows in extra:
        write_rows(out / name, header, rows)
    if not passed:
        _print(f"certificate FAILED for family {payload['family']}")
    return EXIT_OK if passed else EXIT_FAIL


# --------------------------------------------------------------------------
# exhaustion


def cmd_exhaust(cfg, out, rng) -> int:
    p = cfg.get("params", {})
    g = cfgmod.build_graph(cfg["graph"])
    rho = cfgmod.build_density(cfg.get("density"))
    u0 = cfgmod.build_initial(p.get("initial", {"type": "constant"}))
    solver = p.get("solver", "radial" if isinstance(g, _ShellFamily) else "euler")
    metric = p.get("metric", "combinatorial")
    args = (p.get("j_list", [4, 8]), p.get("T", 1.0), p.get("dt", 0.01), solver, metric)
    if p.get("mode", "shift") == "shift":
        run = run_exhaustion(g, rho, u0, *args)
    else:
        run = run_exhaustion_with_boundary(g, rho, u0, p.get("c", 1.0), *args)
    summary = run.summary()
    if run.mode == "shift":
        summary["time_derivative"] = time_derivative_bound_check(run).to_dict()
    rows = []
    for t in p.get("profile_times", [float(run.times[-1])]):
        for i, j in enumerate(run.j_list):
            bins, hi = run.binned_profile(t, i, "max")
            _, lo = run.binned_profile(t, i, "min")
            rows += [[j, float(t), int(b), float(a), float(c)] for b, a, c in zip(bins, hi, lo)]
    write_rows(out / "profiles.csv", ["j", "t", "bin", "max", "min"], rows)
    write_json(out / "exhaust.json", summary)
    ok = summary.get("time_derivative", {}).get("holds", True)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_nonuniqueness(cfg, out, rng) -> int:
    p = cfg.get("params", {})
    g = cfgmod.build_graph(cfg["graph"])
    rho = cfgmod.build_density(cfg.get("density"))
    u0 = cfgmod.build_initial(p.get("initial", {"type": "indicator", "vertices": [list(g.root)]}))
    ex = nonuniqueness_exhibit(g, rho, u0, p.get("c", 1.0), p.get("j_list", [20, 40]), p.get("T", 1.5),
                               p.get("dt", 0.01), p.get("t0", 1.0), p.get("eps", 0.5), p.get("solver"))
    write_rows(out / "profiles.csv", ["radius", "solution_a", "solution_b", "envelope", "separation"],
               ex.profile_rows())
    summary = ex.to_dict()
    if ex.setting == "tree":
        summary["time_derivative"] = time_derivative_bound_check(ex.run_a).to_dict()
    write_json(out / "nonuniqueness.json", summary)
    if p.get("svg", True):
        line_chart_svg(out / "nonuniqueness.svg",
                       {"A(r,t0)": (ex.bins, ex.profile_a), "B(r,t0)": (ex.bins, ex.profile_b),
                        "gamma + C h(r)": (ex.bins, ex.envelope_profile)},
                       "two bounded solutions with the same initial datum", "radius", "value")
    return EXIT_OK if ex.passed else EXIT_FAIL


# --------------------------------------------------------------------------
# table 1


TABLE_ROWS = [
    # key, setting, density condition, preset or inline config, optimality exhibit preset
    ("general", "general weighted graph (binary tree instance)", "rho >= (D+/(r+1)) exp(rho0 log^beta(r+2))",
     {"kind": "certify", "graph": {"family": "tree", "branching": "const:2", "depth": 64},
      "density": {"family": "log_power", "rho0": 1.0, "beta": 1.0},
      "params": {"barrier": {"family": "thm35", "beta": 1.0, "log_shift": 2}, "radius": 61}}, None),
    ("lattice-alpha0", "Z^3, alpha = 0", "rho >= rho0 (1+|x|)^-alpha", "thm42-z3-alpha0", None),
    ("lattice-alpha1", "Z^3, alpha = 1", "rho >= rho0 (1+|x|)^-alpha", "thm42-z3-alpha1", None),
    ("lattice-alpha2", "Z^3, alpha = 2", "rho >= rho0 (1+|x|)^-alpha", "thm42-z3-alpha2", "cor44-z3"),
    ("z2", "Z^2", "rho > 0", "lemma91-z2", None),
    ("tree", "spherically symmetric tree", "rho >= rho0 D+/(r+1)", "thm34-tree", "cor311-tree"),
    ("antitree", "anti-tree", "rho > 0", "lemma94-antitree", None),
]


def cmd_table1(cfg, out, rng) -> int:
    p = cfg.get("params", {})
    wanted = p.get("rows")
    lines = ["| row | setting | density condition | certificate | optimality exhibit | status |",
             "|---|---|---|---|---|---|"]
    rows, all_ok = [], True
    for key, setting, cond, source, exhibit in TABLE_ROWS:
        if wanted and key not in wanted:
            continue
        conf = copy.deepcopy(cfgmod.load_preset(source) if isinstance(source, str) else source)
        if key == "tree" and "tree_rho0_scale" in p:
            conf["density"]["rho0"] *= p["tree_rho0_scale"]
        if key == "antitree" and "antitree_convention" in p:
            conf["graph"]["convention"] = p["antitree_convention"]
        cert_code = dispatch(conf, out / key, rng)
        ex_code = None
        if exhibit:
            ex_code = dispatch(cfgmod.load_preset(exhibit), out / f"{key}-exhibit", rng)
        ok = cert_code == EXIT_OK and ex_code in (None, EXIT_OK)
        all_ok &= ok
        cert = "PASS" if cert_code == EXIT_OK else "FAIL"
        exh = "-" if ex_code is None else ("PASS" if ex_code == EXIT_OK else "FAIL")
        note = ""
        if key == "antitree" and conf["graph"].get("convention", "A") == "B" and not ok:
            note = " (degree convention B; see README, anti-tree conventions)"
        status = ("PASS" if ok else "FAIL") + note
        rows.append([key, setting, cond, cert, exh, status, f"{key}/"])
        cells = [c.replace("|", "\\|") for c in (key, setting, cond, cert, exh, status)]
        lines.append("| " + " | ".join(cells) + " |")
    write_rows(out / "table1.csv", ["row", "setting", "density", "certificate", "exhibit", "status", "files"], rows)
    from .io_utils import atomic_writer
    with atomic_writer(out / "table1.md") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK if all_ok else EXIT_FAIL


COMMANDS = {"identities": cmd_identities, "spectrum": cmd_spectrum, "solve": cmd_solve,
            "certify": cmd_certify, "exhaust": cmd_exhaust, "nonuniqueness": cmd_nonuniqueness,
            "table1": cmd_table1}


def dispatch(cfg: dict, out: Path, rng: np.random.Generator) -> int:
    """Run one validated config; maps refusals and failures to exit codes."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[cfg["kind"]](cfg, out, rng)
    except PreconditionRefused as exc:
        _print(f"refused: {exc}")
        write_json(out / "refusal.json", {"kind": cfg["kind"], "refused": str(exc)})
        return EXIT_REFUSED
    except (ExhaustionError, BarrierError, GraphError) as exc:
        _print(f"verification failed: {exc}")
        return EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphheat", description="Heat equation experiments on weighted graphs.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group(required=name != "table1")
        src.add_argument("--config", type=Path, help="JSON experiment config")
        src.add_argument("--preset", help="bundled config name")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--seed", type=int, help="seed for randomized checks (u64)")
    sub.add_parser("presets", help="list bundled presets")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(cfgmod.preset_names()))
        return EXIT_OK
    try:
        if args.config is not None:
            cfg = cfgmod.load(args.config)
        elif args.preset is not None:
            cfg = cfgmod.load_preset(args.preset)
        else:
            cfg = {"kind": "table1"}
        if cfg["kind"] != args.command:
            raise cfgmod.ConfigError(f"config kind {cfg['kind']!r} does not match subcommand {args.command!r}")
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not 0 <= seed < 2 ** 64:
            raise cfgmod.ConfigError("seed must be an unsigned 64-bit integer")
    except cfgmod.ConfigError as exc:
        _print(str(exc))
        return EXIT_CONFIG
    out = args.out or Path(cfg.get("output", f"graphheat-out/{args.command}"))
    try:
        return dispatch(cfg, out, np.random.default_rng(seed))
    except cfgmod.ConfigError as exc:
        _print(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
