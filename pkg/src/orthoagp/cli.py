"""Command-line front end.

Subcommands: ``count``, ``coeffs``, ``norm``, ``verify`` and ``dynamics``.
Vertices are 0-indexed everywhere (edge files, ``--extra-edge``, labels).

Exit codes: 0 success, 2 configuration error, 3 resource cap exceeded,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import io as oio
from .ed import (
    ED_MAX_SITES,
    Schedule,
    exact_agp,
    exact_agp_table,
    orbit_stack,
    project_basis,
    simulate_cd,
    solver_agp_table,
)
from .estimator import AGPEstimator
from .expansion import DEFAULT_MAX_ORBITS, EmptyBasisError, ResourceCapError
from .models import GraphSpec, chain, chord_chain, complete, d_lambda, read_edge_list, ring, tfim
from .oracles import (
    KAPPA,
    count_chain,
    count_complete,
    count_max,
    count_ring,
    lmg_degeneracy,
    lmg_sector_norms,
    lmg_spins,
    measure_kappa,
    ring_alpha,
)
from .pauli import parse_label
from .solver import DEFAULT_THRESHOLD, ResidualEvaluator, sweep
from .symmetry import AsymmetricInputError, SymmetryGroup, TrivialGroup, builtin_group, \
    group_from_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_VERIFY = 4


class ConfigError(ValueError):
    """Inconsistent or invalid command-line configuration."""


# ---------------------------------------------------------------- parsing

def _edge(text: str) -> Tuple[int, int]:
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'i,j', got {text!r}") from None
    return i, j


def _common(p: argparse.ArgumentParser, grid: Tuple[float, float, int]) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", choices=["ring", "chain", "complete", "chord-chain"])
    src.add_argument("--edges", metavar="PATH", help="edge-list file ('i j' per line, 0-indexed)")
    p.add_argument("--n", type=int, help="number of sites for --graph")
    p.add_argument("--extra-edge", type=_edge, action="append", default=[], metavar="i,j",
                   help="extra edge for chord-chain (0-indexed, repeatable)")
    p.add_argument("--symmetry", default="auto", metavar="{auto,trivial,file:PATH}")
    p.add_argument("--j", type=float, default=1.0)
    p.add_argument("--lambda-min", type=float, default=grid[0])
    p.add_argument("--lambda-max", type=float, default=grid[1])
    p.add_argument("--steps", type=int, default=grid[2])
    p.add_argument("--truncate-layers", type=int, default=None, metavar="INT")
    p.add_argument("--max-weight", type=int, default=None, metavar="INT")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--max-orbits", type=int, default=DEFAULT_MAX_ORBITS)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthoagp",
        description="Variational adiabatic gauge potentials of transverse-field Ising "
                    "models. Vertices are 0-indexed.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="number of gauge-potential orbits and layer sizes")
    _common(p, (0.0, 2.0, 21))

    p = sub.add_parser("coeffs", help="coefficient sweep over lambda")
    _common(p, (0.0, 2.0, 21))

    p = sub.add_parser("norm", help="norm sweep over lambda")
    _common(p, (0.0, 2.0, 21))
    p.add_argument("--lmg-sectors", action="store_true",
                   help="add per-spin-sector norms (complete graphs only)")

    p = sub.add_parser("verify", help="cross-check the solver against exact diagonalisation")
    _common(p, (0.25, 2.0, 4))
    p.add_argument("--expect-approx", action="store_true",
                   help="report, but do not fail, checks that need an exact basis")
    p.add_argument("--kappa", type=float, default=KAPPA,
                   help="frozen calibration constant to compare with the measured one")

    p = sub.add_parser("dynamics", help="counterdiabatic evolution and fidelity trace")
    _common(p, (0.0, 2.0, 2))
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--schedule", choices=["sin_squared", "linear"], default="sin_squared")
    p.add_argument("--agp", choices=["solver", "exact", "none"], default="solver")
    p.add_argument("--grid", type=int, default=401, help="AGP interpolation grid size")
    p.add_argument("--samples", type=int, default=201, help="output time samples")
    return parser


def _config(args: argparse.Namespace) -> Dict[str, Any]:
    cfg = {k: v for k, v in vars(args).items() if k != "out"}
    if cfg.get("edges") is not None:
        cfg["edges_text"] = Path(cfg["edges"]).read_text(encoding="utf-8")
        cfg["edges"] = Path(cfg["edges"]).name
    sym = cfg.get("symmetry", "")
    if sym.startswith("file:"):
        cfg["symmetry_text"] = Path(sym[5:]).read_text(encoding="utf-8")
    return cfg


def _graph(args: argparse.Namespace) -> GraphSpec:
    if args.edges is not None:
        if args.extra_edge:
            raise ConfigError("--extra-edge is only valid with --graph chord-chain")
        return read_edge_list(args.edges)
    if args.n is None:
        raise ConfigError("--n is required with --graph")
    if args.extra_edge and args.graph != "chord-chain":
        raise ConfigError("--extra-edge is only valid with --graph chord-chain")
    if args.graph == "ring":
        return ring(args.n)
    if args.graph == "chain":
        return chain(args.n)
    if args.graph == "complete":
        return complete(args.n)
    if not args.extra_edge:
        raise ConfigError("--graph chord-chain needs at least one --extra-edge")
    return chord_chain(args.n, args.extra_edge)


def _group(args: argparse.Namespace, graph: GraphSpec) -> SymmetryGroup:
    sym = args.symmetry
    if sym == "auto":
        if graph.name in ("ring", "chain", "complete"):
            return builtin_group(graph.name, graph.n)
        return TrivialGroup(graph.n)
    if sym == "trivial":
        return TrivialGroup(graph.n)
    if sym.startswith("file:"):
        return group_from_json(Path(sym[5:]).read_text(encoding="utf-8"), graph.n)
    raise ConfigError(f"--symmetry must be auto, trivial or file:PATH, got {sym!r}")


def _grid(args: argparse.Namespace) -> np.ndarray:
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    if args.lambda_min < 0 or args.lambda_max < args.lambda_min:
        raise ConfigError("need 0 <= --lambda-min <= --lambda-max")
    if args.steps == 1:
        return np.array([args.lambda_min])
    if args.lambda_max == args.lambda_min:
        raise ConfigError("--lambda-max must exceed --lambda-min when --steps > 1")
    return np.linspace(args.lambda_min, args.lambda_max, args.steps)


def _estimator(args: argparse.Namespace, group: Optional[SymmetryGroup] = None,
               graph: Optional[GraphSpec] = None) -> AGPEstimator:
    graph = graph or _graph(args)
    est = AGPEstimator(j=args.j, symmetry=group or _group(args, graph),
                       max_odd_layers=args.truncate_layers, max_weight=args.max_weight,
                       threshold=args.threshold, max_orbits=args.max_orbits)
    return est.fit(graph)


def _emit(args, cfg, columns, rows, payload, extra_meta=None) -> None:
    meta = oio.header(cfg)
    meta.update(extra_meta or {})
    if args.format == "csv":
        text = oio.render_csv(columns, rows, meta)
    else:
        text = oio.render_json(payload, meta)
    oio.write_output(text, args.out, sys.stdout)


# ---------------------------------------------------------------- commands

def cmd_count(args: argparse.Namespace) -> int:
    cfg = _config(args)
    graph = _graph(args)
    est = _estimator(args, graph=graph)
    rep = est.report_
    items: List[Tuple[str, Any]] = [
        ("n_sites", graph.n),
        ("n_agp", rep.n_agp),
        ("n_even", rep.n_even),
        ("odd_layer_sizes", " ".join(map(str, rep.odd_layer_sizes))),
        ("even_layer_sizes", " ".join(map(str, rep.even_layer_sizes))),
        ("truncated", rep.truncated),
        ("bound_count_max", count_max(graph.n)),
    ]
    if graph.name == "ring" and graph.n >= 3:
        items.append(("closed_form_ring", count_ring(graph.n)))
    elif graph.name == "chain":
        items.append(("closed_form_chain", count_chain(graph.n)))
    elif graph.name == "complete":
        cc = count_complete(graph.n)
        items += [("enumerated_complete", cc.value), ("printed_formula", str(cc.formula)),
                  ("formula_discrepancy", cc.discrepancy)]
        if cc.discrepancy:
            print(f"note: the closed-form complete-graph count gives {cc.formula}, "
                  f"enumeration gives {cc.value}", file=sys.stderr)
    payload = dict(items)
    payload["odd_layer_sizes"] = list(rep.odd_layer_sizes)
    payload["even_layer_sizes"] = list(rep.even_layer_sizes)
    _emit(args, cfg, ["quantity", "value"], items, payload)
    return EXIT_OK


def _sweep_payload(est: AGPEstimator, rows: List[dict]) -> Dict[str, Any]:
    payload = oio.expansion_dump(est.basis_, est.constants_, est.report_)
    payload["sweep"] = [{"lambda": r["lam"], "j": r["j"], "alphas": r["alphas"],
                         "norm_sq": r["norm_sq"], "residual_f": r["residual_f"],
                         "dense_fallback": r["dense_fallback"], "error": r["error"]}
                        for r in rows]
    return payload


def _failed(rows: List[dict]) -> Dict[str, Any]:
    bad = [format(r["lam"], ".17g") for r in rows if r["error"] is not None]
    return {"failed_points": " ".join(bad)} if bad else {}


def cmd_coeffs(args: argparse.Namespace) -> int:
    cfg = _config(args)
    grid = _grid(args)
    est = _estimator(args)
    res = ResidualEvaluator(est.hamiltonian_, est.basis_, est.constants_) \
        if args.format == "json" else None
    rows = sweep(est.hessian_, est.basis_, grid, args.j, args.threshold, residual=res)
    table = [[r["lam"], r["j"], *r["alphas"]] for r in rows]
    _emit(args, cfg, ["lambda", "j", *est.labels_], table, _sweep_payload(est, rows),
          _failed(rows))
    return EXIT_OK


def cmd_norm(args: argparse.Namespace) -> int:
    cfg = _config(args)
    grid = _grid(args)
    graph = _graph(args)
    if args.lmg_sectors and graph.name != "complete":
        raise ConfigError("--lmg-sectors needs --graph complete")
    est = _estimator(args, graph=graph)
    rows = sweep(est.hessian_, est.basis_, grid, args.j, args.threshold)
    columns = ["lambda", "j", "norm_sq"]
    spins = lmg_spins(graph.n) if args.lmg_sectors else []
    if spins:
        columns += [f"sector_s={s:g}" for s in spins] + ["sector_weighted_sum"]
    table = []
    for r in rows:
        line = [r["lam"], r["j"], r["norm_sq"]]
        if spins:
            sec = lmg_sector_norms(graph.n, r["lam"], args.j)
            vals = [sec[s] for s in spins]
            line += vals + [float(sum(lmg_degeneracy(graph.n, s) * v
                                      for s, v in zip(spins, vals)))]
        table.append(line)
    payload: Dict[str, Any] = {"columns": columns, "rows": table}
    if spins:
        payload["sector_degeneracies"] = {f"{s:g}": lmg_degeneracy(graph.n, s) for s in spins}
    _emit(args, cfg, columns, table, payload, _failed(rows))
    return EXIT_OK


def _check(name: str, value: float, tol: float, lam: Optional[float] = None,
           informational: bool = False, **extra) -> Dict[str, Any]:
    ok = bool(np.isfinite(value) and value <= tol)
    out = {"check": name, "lambda": lam, "value": float(value), "tol": tol,
           "passed": ok or informational, "informational": informational}
    out.update(extra)
    return out


def _expand_alphas(est: AGPEstimator, alphas: np.ndarray, keys) -> np.ndarray:
    """Orbit coefficients spread onto individual strings ``keys``."""
    g = est.group_
    out = np.zeros(len(keys))
    for i, key in enumerate(keys):
        rep, _ = g.canonicalize(key)
        idx = est.basis_.odd_index.get(rep)
        out[i] = alphas[idx] if idx is not None else 0.0
    return out


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _config(args)
    grid = _grid(args)
    graph = _graph(args)
    if graph.n > min(ED_MAX_SITES, 8):
        raise ConfigError(f"verify uses exact diagonalisation; n must be <= 8, got {graph.n}")
    est = _estimator(args, graph=graph)
    approx = bool(args.expect_approx)
    h = est.hamiltonian_
    dh_scale = float(sum(v * v for v in d_lambda(h).terms.values())) or 1.0
    res = ResidualEvaluator(h, est.basis_, est.constants_)
    checks: List[Dict[str, Any]] = []

    measured = measure_kappa()
    checks.append(_check("kappa_calibration", abs(measured - args.kappa), 1e-9,
                         measured=measured, frozen=args.kappa))

    ungrouped = None
    if est.group_.order != 1 or graph.name == "complete":
        ungrouped = _estimator(args, group=TrivialGroup(graph.n), graph=graph)

    for lam in grid:
        lam = float(lam)
        alpha = est.predict([lam])[0]
        f_rel = res(alpha, args.j, lam) / dh_scale
        checks.append(_check("residual_f", f_rel, 1e-12, lam, informational=approx))
        exact = project_basis(exact_agp(h, lam, args.j), est.basis_)
        checks.append(_check("projection_identity", float(np.abs(alpha - exact).max()), 1e-8,
                             lam, informational=approx))
        if ungrouped is not None:
            a_full = ungrouped.predict([lam])[0]
            spread = _expand_alphas(est, alpha, ungrouped.basis_.odd_keys)
            checks.append(_check("grouped_vs_ungrouped", float(np.abs(spread - a_full).max()),
                                 1e-10, lam))
        if graph.name == "ring" and args.j in (1.0, -1.0) and not approx:
            errs = []
            for k in range(1, graph.n):
                key = parse_label("y" + "x" * (k - 1) + "z" + "I" * (graph.n - k - 1),
                                  graph.n).key
                rep, _ = est.group_.canonicalize(key)
                idx = est.basis_.odd_index.get(rep)
                got = alpha[idx] if idx is not None else 0.0
                ref = args.kappa * ring_alpha(graph.n, args.j, lam, k)
                errs.append(abs(got - ref) / max(abs(ref), 1e-300) if ref != 0 else abs(got))
            checks.append(_check("ring_closed_form", max(errs), 1e-9, lam))

    failures = [c for c in checks if not c["passed"]]
    columns = ["check", "lambda", "value", "tol", "passed", "informational"]
    table = [[c["check"], c["lambda"], c["value"], c["tol"], c["passed"], c["informational"]]
             for c in checks]
    _emit(args, cfg, columns, table, {"checks": checks, "failures": failures},
          {"n_failures": len(failures)})
    if failures:
        print(json.dumps({"failures": oio._jsonable(failures)}, sort_keys=True),
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_dynamics(args: argparse.Namespace) -> int:
    cfg = _config(args)
    graph = _graph(args)
    if graph.n > ED_MAX_SITES:
        raise ConfigError(f"dynamics needs n <= {ED_MAX_SITES}")
    if not args.duration > 0:
        raise ConfigError("--duration must be positive")
    if args.lambda_max == args.lambda_min:
        raise ConfigError("--lambda-max must differ from --lambda-min")
    est = _estimator(args, graph=graph)
    lo, hi = args.lambda_min, args.lambda_max
    if args.agp == "solver":
        agp = solver_agp_table(est.hessian_, est.basis_, lo, hi, args.j, args.threshold,
                               n_grid=args.grid, stack=orbit_stack(est.basis_))
    elif args.agp == "exact":
        agp = exact_agp_table(est.hamiltonian_, lo, hi, args.j, n_grid=args.grid)
    else:
        agp = None
    sched = Schedule(lo, hi, args.duration, args.schedule)
    result = simulate_cd(est.hamiltonian_, sched, agp, j=args.j, n_samples=args.samples)
    table = [[t, l, f, s] for t, l, f, s in
             zip(result.t, result.lam, result.fidelity, result.state_norm)]
    summary = {"final_fidelity": result.final_fidelity, "norm_drift": result.norm_drift,
               "threshold": args.threshold, "agp": args.agp}
    payload = {"summary": summary, "columns": ["t", "lambda", "fidelity", "state_norm"],
               "rows": table}
    _emit(args, cfg, ["t", "lambda", "fidelity", "state_norm"], table, payload, summary)
    return EXIT_OK


COMMANDS = {"count": cmd_count, "coeffs": cmd_coeffs, "norm": cmd_norm,
            "verify": cmd_verify, "dynamics": cmd_dynamics}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({"partial_report": exc.report.as_dict()}, sort_keys=True),
              file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, AsymmetricInputError, EmptyBasisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
