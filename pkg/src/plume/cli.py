"""Command line interface: ``plume <command> [options]``.

Exit codes: 0 on success (or a certified inversion), 2 when an inversion
stopped at ``max_iter`` without certificate, 1 on error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from . import scenario as scen
from . import verify
from .transport import export_trajectory_csv

log = logging.getLogger("plume")

EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED = 0, 1, 2


def _load_config(args):
    if args.config:
        cfg = scen.ScenarioConfig.load(args.config)
    else:
        cfg = scen.preset(args.preset)
    if args.seed is not None:
        cfg = cfg.with_updates(noise={"seed": args.seed})
    return cfg


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_json(obj):
    print(json.dumps(obj, indent=2, default=float))


def cmd_mesh(args):
    if args.action == "info":
        m = meshmod.read_mesh(args.file)
        m.check()
        _print_json({
            "nodes": m.n_nodes,
            "triangles": m.n_triangles,
            "boundary_edges": len(m.boundary_edges),
            "area": float(m.areas.sum()),
            "h_max": m.h_max,
            "bounds": list(m.bounds),
        })
        return EXIT_OK
    if args.bounds:
        params = {"bounds": args.bounds, "nx": args.nx, "ny": args.ny, "holes": args.hole or []}
    else:
        params = _load_config(args).mesh
    m = scen.build_mesh(params)
    path = _out_dir(args) / args.name
    meshmod.write_mesh(m, path)
    print(f"wrote {path} ({m.n_nodes} nodes, {m.n_triangles} triangles)")
    return EXIT_OK


def cmd_forward(args):
    cfg = _load_config(args)
    sc = scen.Scenario(cfg)
    from .sources import measure_to_fields, shape_from_dict

    shapes = {k: shape_from_dict(v["shape"]) for k, v in cfg.sources.items() if v}
    m_I, m_C = measure_to_fields(sc.truth["initial"], sc.truth["continuous"], shapes, sc.mesh, sc.transport.mat)
    traj = sc.transport.forward_solve(m_I, m_C)
    path = _out_dir(args) / "forward.csv"
    export_trajectory_csv(traj, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_observe(args):
    cfg = _load_config(args)
    d, clean, plan = scen.generate_measurements(cfg)
    out = _out_dir(args)
    from .transport import export_series_csv

    export_series_csv(plan, d, out / "data.csv")
    export_series_csv(plan, clean, out / "clean.csv")
    print(f"{len(d)} observations, sigma = {plan.noise_sigma:.6g}; wrote {out}")
    return EXIT_OK


def cmd_invert(args):
    cfg = _load_config(args)
    rep = scen.run_scenario(cfg, _out_dir(args), method=args.method)
    summary = {"method": args.method, "metrics": rep.metrics, "counters": rep.result.counters}
    if args.method == "pdap":
        summary["status"] = rep.result.status
        summary["iterations"] = rep.result.iterations
        _print_json(summary)
        return EXIT_UNCERTIFIED if rep.result.status == "max_iter" else EXIT_OK
    summary["converged"] = rep.result.converged
    summary["iterations"] = rep.result.iterations
    _print_json(summary)
    return EXIT_OK if rep.result.converged else EXIT_UNCERTIFIED


def cmd_verify(args):
    if args.check == "convergence":
        rows = scen.convergence_study(args.refinements)
        for r in rows:
            order = "" if r["order"] is None else f"  order {r['order']:.3f}"
            print(f"h = 1/{r['n']:<4d} dt = {r['dt']:.5f}  error {r['error']:.6g}{order}")
        ok = rows[-1]["order"] >= 0.9
    elif args.check == "duality":
        errs = verify.duality_check(n_trials=args.trials, seed=args.seed or 0)
        print(f"max relative error: initial {errs[:, 0].max():.3e}, continuous {errs[:, 1].max():.3e}")
        ok = errs.max() <= 1e-10
    else:
        drift = verify.conservation_check()
        print(f"max relative mass drift over {len(drift) - 1} steps: {drift.max():.3e}")
        ok = drift.max() <= 1e-10
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_suite(args):
    out = _out_dir(args)
    if args.suite == "robustness":
        reports = scen.robustness_suite(out_dir=out)
        rows = [{"preset": name, "status": r.result.status, "iterations": r.result.iterations,
                 "max_distance": r.max_distance, "online_solves": r.online_solves}
                for name, r in reports.items()]
    else:
        cfg = _load_config(args) if args.config else scen.preset("comparison")
        rows = scen.compare_methods(cfg, out)
        for row in rows:
            row.pop("report")
    (out / f"{args.suite}.json").write_text(json.dumps(rows, indent=2))
    _print_json(rows)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="plume", description="Contaminant source identification")
    parser.add_argument("--config", help="scenario JSON file")
    parser.add_argument("--preset", default="baseline", choices=sorted(scen.PRESETS),
                        help="built-in scenario used when --config is absent")
    parser.add_argument("--seed", type=int, help="noise seed (overrides the config)")
    parser.add_argument("--out", default="plume_out", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate or inspect meshes")
    p.add_argument("action", choices=["gen", "info"])
    p.add_argument("file", nargs="?", help="mesh file (info)")
    p.add_argument("--bounds", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--ny", type=int, default=64)
    p.add_argument("--hole", type=float, nargs=4, action="append", metavar=("X0", "Y0", "X1", "Y1"))
    p.add_argument("--name", default="mesh.txt", help="output file name inside --out")
    p.set_defaults(func=cmd_mesh)

    sub.add_parser("forward", help="simulate the truth sources").set_defaults(func=cmd_forward)
    sub.add_parser("observe", help="generate synthetic measurements").set_defaults(func=cmd_observe)

    p = sub.add_parser("invert", help="identify sources")
    p.add_argument("method", choices=["pdap", "l2"])
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("verify", help="numerical self-checks")
    p.add_argument("check", choices=["convergence", "duality", "conservation"])
    p.add_argument("--refinements", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("suite", help="robustness or method-comparison studies")
    p.add_argument("suite", choices=["robustness", "comparison"])
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "mesh" and args.action == "info" and not args.file:
        print("error: mesh info needs a file", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (Exception, np.linalg.LinAlgError) as exc:
        if args.verbose:
            log.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
