"""Command-line interface.

Verbs: steady, transient, sensitivity, compare, export.  Global flags
--config, --out, --seed, --level, --approach, --smoother override the
corresponding config-file entries.  Exit code 0 on success; on failure a
machine-readable error record is printed to stderr and the exit code is 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import driver, io as out_io
from .driver import DriverError, RunConfig


def _base_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="intercell",
        description="Coupled reaction-diffusion/cell-receptor solver")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, desc in (
            ("steady", "solve the stationary problem"),
            ("transient", "march the time-dependent problem"),
            ("sensitivity", "coupling-strength analysis at the steady state"),
            ("compare", "run a comparison campaign over several configs"),
            ("export", "convert a saved state CSV to legacy VTK")):
        sp = sub.add_parser(verb, help=desc)
        if verb == "compare":
            sp.add_argument("--config", action="append", default=[],
                            metavar="PATH", help="config file (repeatable)")
        else:
            sp.add_argument("--config", metavar="PATH",
                            help="run configuration file")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--level", type=int, metavar="L",
                        help="finest refinement level")
        sp.add_argument("--approach", choices=("coupled", "decoupled"))
        sp.add_argument("--smoother", choices=("s1", "s2"))
        if verb == "export":
            sp.add_argument("--state", metavar="CSV", required=True,
                            help="state CSV written by steady/transient")
    return p


def _load_config(args, path=None) -> RunConfig:
    path = path if path is not None else args.config
    cfg = RunConfig.from_file(path) if path else RunConfig()
    kw = {}
    if args.out is not None:
        kw["directory"] = args.out
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.level is not None:
        kw["level"] = args.level
    if args.approach is not None:
        kw["approach"] = args.approach
    if args.smoother is not None:
        kw["smoother"] = args.smoother
    return dataclasses.replace(cfg, **kw) if kw else cfg


def main(argv=None) -> int:
    args = _base_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except Exception as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1


def _dispatch(args) -> int:
    if args.verb == "compare":
        if not args.config:
            print("empty comparison campaign: no configs given")
            out = Path(args.out or "out")
            out.mkdir(parents=True, exist_ok=True)
            driver.run_comparison([], out_path=out / "comparison.csv")
            return 0
        configs = [_load_config(args, path=c) for c in args.config]
        out = Path(args.out or configs[0].directory)
        out.mkdir(parents=True, exist_ok=True)
        rows = driver.run_comparison(
            configs, labels=[Path(c).stem for c in args.config],
            out_path=out / "comparison.csv")
        for r in rows:
            print(f"{r['label']}: {r['status']} "
                  f"sigma_n={r['sigma_n']} sigma_s={r['sigma_s']}")
        if any(r["status"] != "ok" for r in rows):
            raise DriverError("one or more campaign runs failed")
        return 0

    cfg = _load_config(args)

    if args.verb == "export":
        disc, _, _ = driver.build_problem(cfg)
        u, _ = out_io.read_state_csv(args.state)
        mesh = disc.hierarchy.meshes[disc.finest]
        if u.shape[0] != mesh.n_vertices:
            raise DriverError(
                f"state has {u.shape[0]} PDE values but the configured mesh "
                f"has {mesh.n_vertices} vertices")
        out = Path(cfg.directory)
        out.mkdir(parents=True, exist_ok=True)
        out_io.export_vtk(out / "field.vtk", mesh, {"il2_nM": u})
        print(f"wrote {out / 'field.vtk'}")
        return 0

    disc, params, secreting = driver.build_problem(cfg)
    print(f"{disc.hierarchy.n_cells} cells "
          f"({len(secreting)} secreting: {list(secreting)}), level "
          f"{cfg.level}, {disc.levels[disc.finest].n_pde} PDE unknowns")

    if args.verb == "transient":
        traj = driver.run_transient(cfg, disc, params)
        out = driver.write_run_outputs(cfg, disc, trajectory=traj)
        t = traj.totals
        print(f"steps: {len(traj.step_stats)}  sigma_n: {t.newton_steps}  "
              f"sigma_s: {t.krylov_total}")
        print(f"outputs in {out}")
        return 0

    # steady and sensitivity both need the stationary solution
    res = driver.run_stationary(cfg, disc, params)
    out = driver.write_run_outputs(cfg, disc, result=res)
    print(f"newton steps: {res.stats.newton_steps}  "
          f"gmres iterations: {res.stats.krylov_total}")
    exch, deg = driver.flux_balance(disc, res.state, params)
    print(f"flux balance: boundary exchange {exch:.6g}, "
          f"degradation {deg:.6g}")
    if args.verb == "sensitivity":
        print(str(res.report))
    else:
        print(f"coupling: lambda_max = {res.report.lambda_max:.4g} "
              f"({res.report.classification})")
    print(f"outputs in {out}")
    return 0


if __name__ == "__main__":        # pragma: no cover
    sys.exit(main())
