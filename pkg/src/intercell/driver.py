"""Run orchestration: configuration files, implicit-Euler time marching,
stationary solves with pseudo-timestep warm starts, comparison campaigns,
and output (CSV, legacy VTK, metadata).
"""

from __future__ import annotations

import configparser
import dataclasses
import io as _io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as out_io
from .assembly import Discretization, SystemState
from .mesh import MeshConfig, build_hierarchy
from .model import ModelParams, select_secreting
from .newton import (NewtonConfig, SolveStats, pseudo_timestep_globalize,
                     solve_newton)
from .sensitivity import CouplingReport, coupling_strength

try:
    from importlib.metadata import version as _pkg_version
    VERSION = _pkg_version("intercell")
except Exception:           # pragma: no cover - not installed
    VERSION = "unknown"

UNIT_CONVENTIONS = ("lengths um; time h; extracellular concentration nM; "
                    "receptor counts molecules/cell; "
                    "alpha = 0.6022 molecules/um^3 per nM")


class DriverError(RuntimeError):
    pass


SMOOTHER_NAMES = {"s1": "coupled_s1", "s2": "coupled_s2"}


@dataclass
class RunConfig:
    # [mesh]
    n: int = 2                    # biological cells per axis (n^3 total)
    cell_side: float = 10.0
    gap: float = 5.0
    level: int = 1                # finest refinement level L
    # [model]
    params: ModelParams = field(default_factory=ModelParams)
    n_secreting: int = 1
    q_secreting: float = 2500.0
    seed: int = 0
    # [solver]
    approach: str = "coupled"     # coupled | decoupled
    smoother: str = "s1"          # s1 | s2
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    # [time]
    stationary: bool = False
    dt: float = 0.1
    t_final: float = 20.0
    pseudo_dt: float = 0.5        # warm-start step for stationary solves
    pseudo_steps: int = 20
    # [output]
    directory: str = "out"
    vtk_every: int = 0            # write VTK every k-th step; 0 = final only

    def __post_init__(self):
        if self.approach not in ("coupled", "decoupled"):
            raise DriverError(f"unknown approach {self.approach!r}")
        if self.smoother not in SMOOTHER_NAMES:
            raise DriverError(f"unknown smoother {self.smoother!r}")
        if not self.stationary:
            if self.dt <= 0:
                raise DriverError("dt must be positive for transient runs")
            if self.t_final < self.dt:
                raise DriverError("t_final must be at least dt")
        self.newton = dataclasses.replace(
            self.newton, smoother=SMOOTHER_NAMES[self.smoother])

    # -- serialization ------------------------------------------------------

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise DriverError(f"cannot read config file {path}")
        return cls.from_parser(cp)

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "RunConfig":
        kw = {}
        mesh = cp["mesh"] if cp.has_section("mesh") else {}
        for key, conv in (("n", int), ("cell_side", float), ("gap", float),
                          ("level", int)):
            if key in mesh:
                kw[key] = conv(mesh[key])
        model = cp["model"] if cp.has_section("model") else {}
        overrides = {}
        for f in dataclasses.fields(ModelParams):
            if f.name in model and f.name != "q":
                overrides[f.name] = float(model[f.name])
        kw["params"] = ModelParams(**overrides)
        for key, conv in (("n_secreting", int), ("q_secreting", float),
                          ("seed", int)):
            if key in model:
                kw[key] = conv(model[key])
        solver = cp["solver"] if cp.has_section("solver") else {}
        nkw = {}
        for key, conv in (("tol_newton", float), ("tol_iter", float),
                          ("max_newton", int), ("max_sweeps", int),
                          ("gmres_max", int), ("smoothing_steps", int)):
            if key in solver:
                nkw[key] = conv(solver[key])
        if "max_iter_fixedpoint" in solver:
            v = int(solver["max_iter_fixedpoint"])
            nkw["max_iter_fixedpoint"] = v if v > 0 else None
        kw["newton"] = NewtonConfig(**nkw)
        for key in ("approach", "smoother"):
            if key in solver:
                kw[key] = solver[key]
        tsec = cp["time"] if cp.has_section("time") else {}
        if "stationary" in tsec:
            kw["stationary"] = cp.getboolean("time", "stationary")
        for key, conv in (("dt", float), ("t_final", float),
                          ("pseudo_dt", float), ("pseudo_steps", int)):
            if key in tsec:
                kw[key] = conv(tsec[key])
        outsec = cp["output"] if cp.has_section("output") else {}
        if "directory" in outsec:
            kw["directory"] = outsec["directory"]
        if "vtk_every" in outsec:
            kw["vtk_every"] = int(outsec["vtk_every"])
        return cls(**kw)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["mesh"] = {"n": str(self.n), "cell_side": repr(self.cell_side),
                      "gap": repr(self.gap), "level": str(self.level)}
        cp["model"] = {f.name: repr(getattr(self.params, f.name))
                       for f in dataclasses.fields(ModelParams)
                       if f.name != "q"}
        cp["model"].update({"n_secreting": str(self.n_secreting),
                            "q_secreting": repr(self.q_secreting),
                            "seed": str(self.seed)})
        nc = self.newton
        cp["solver"] = {
            "approach": self.approach, "smoother": self.smoother,
            "tol_newton": repr(nc.tol_newton), "tol_iter": repr(nc.tol_iter),
            "max_iter_fixedpoint": str(nc.max_iter_fixedpoint or 0),
            "max_newton": str(nc.max_newton),
            "max_sweeps": str(nc.max_sweeps),
            "gmres_max": str(nc.gmres_max),
            "smoothing_steps": str(nc.smoothing_steps)}
        cp["time"] = {"stationary": str(self.stationary).lower(),
                      "dt": repr(self.dt), "t_final": repr(self.t_final),
                      "pseudo_dt": repr(self.pseudo_dt),
                      "pseudo_steps": str(self.pseudo_steps)}
        cp["output"] = {"directory": self.directory,
                        "vtk_every": str(self.vtk_every)}
        buf = _io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def build_problem(config: RunConfig) -> tuple[Discretization, ModelParams,
                                              np.ndarray]:
    """Hierarchy + discretization + parameters with the secretion pattern
    drawn from the configured seed."""
    mc = MeshConfig(cells_per_axis=config.n, cell_side=config.cell_side,
                    gap=config.gap, levels=config.level)
    disc = Discretization(build_hierarchy(mc))
    n_cells = disc.hierarchy.n_cells
    if not 0 <= config.n_secreting <= n_cells:
        raise DriverError("n_secreting out of range")
    secreting = select_secreting(n_cells, config.n_secreting, config.seed)
    q = np.zeros(n_cells)
    q[secreting] = config.q_secreting
    return disc, config.params.with_secretion(q), secreting


@dataclass
class Trajectory:
    times: np.ndarray             # (n_stamps,), starts at 0
    u_tilde: np.ndarray           # (n_stamps, n_cells)
    receptors: np.ndarray         # (n_stamps, n_cells, 3) -> R, C, E
    step_stats: list              # SolveStats per step (len n_stamps - 1)
    final_state: SystemState
    totals: SolveStats

    def __post_init__(self):
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise DriverError("time stamps must increase strictly from 0")

    def write_csv(self, path) -> None:
        header = ["time"]
        nc = self.u_tilde.shape[1]
        for i in range(nc):
            header += [f"u_tilde_{i}", f"R_{i}", f"C_{i}", f"E_{i}"]
        rows = []
        for s, t in enumerate(self.times):
            row = [float(t)]
            for i in range(nc):
                row += [float(self.u_tilde[s, i]),
                        float(self.receptors[s, i, 0]),
                        float(self.receptors[s, i, 1]),
                        float(self.receptors[s, i, 2])]
            rows.append(row)
        out_io.write_csv(path, header, rows)


def run_transient(config: RunConfig, disc: Discretization | None = None,
                  params: ModelParams | None = None,
                  initial: SystemState | None = None) -> Trajectory:
    """Implicit Euler from the rest state (or `initial`), each step solved by
    the configured Newton variant warm-started from the previous step."""
    if disc is None or params is None:
        disc, params, _ = build_problem(config)
    ctx = disc.levels[disc.finest]
    state = (initial or disc.rest_state(params)).copy()
    n_steps = int(round(config.t_final / config.dt))
    times = [0.0]
    u_tilde = [ctx.surface_average(state.u)]
    receptors = [state.v_cells.copy()]
    step_stats = []
    totals = SolveStats()
    for step in range(1, n_steps + 1):
        prev = state.copy()
        try:
            state, stats = solve_newton(disc, state, params, config.newton,
                                        config.approach, k=config.dt,
                                        prev=prev)
        except Exception as exc:
            raise DriverError(
                f"transient solve failed at step {step} "
                f"(t = {step * config.dt:g} h): {exc}") from exc
        step_stats.append(stats)
        totals.merge(stats)
        times.append(step * config.dt)
        u_tilde.append(ctx.surface_average(state.u))
        receptors.append(state.v_cells.copy())
    return Trajectory(times=np.array(times), u_tilde=np.array(u_tilde),
                      receptors=np.array(receptors), step_stats=step_stats,
                      final_state=state, totals=totals)


@dataclass
class StationaryResult:
    state: SystemState
    stats: SolveStats             # final stationary Newton solve only
    warmup_stats: SolveStats      # pseudo-timestep pre-iterations
    report: CouplingReport


def run_stationary(config: RunConfig, disc: Discretization | None = None,
                   params: ModelParams | None = None,
                   initial: SystemState | None = None) -> StationaryResult:
    """Pseudo-timestep globalization followed by the configured stationary
    Newton variant; evaluates the coupling strength at the solution."""
    if disc is None or params is None:
        disc, params, _ = build_problem(config)
    start = (initial or disc.rest_state(params)).copy()
    warm_cfg = config.newton
    warmup = SolveStats()
    state = start
    for _ in range(config.pseudo_steps):
        prev = state.copy()
        state, st = solve_newton(disc, state, params, warm_cfg,
                                 config.approach, k=config.pseudo_dt,
                                 prev=prev)
        warmup.merge(st)
    state, stats = solve_newton(disc, state, params, config.newton,
                                config.approach)
    report = coupling_strength(
        disc, state, params,
        description=f"stationary solution (level {config.level}, "
                    f"{disc.hierarchy.n_cells} cells)")
    return StationaryResult(state=state, stats=stats, warmup_stats=warmup,
                            report=report)


def flux_balance(disc: Discretization, state: SystemState,
                 params: ModelParams) -> tuple[float, float]:
    """(total boundary exchange, volumetric degradation) at a state; the two
    agree at a steady state by the divergence theorem."""
    ctx = disc.levels[state.level]
    u_tilde = ctx.surface_average(state.u)
    v = state.v_cells
    exchange = float(np.sum(
        (params.q - params.k_on * v[:, 0] * u_tilde
         + params.k_off * v[:, 1]) / params.alpha))
    degradation = float(params.k_d * (ctx.M @ state.u).sum())
    return exchange, degradation


def write_run_outputs(config: RunConfig, disc: Discretization,
                      result=None, trajectory: Trajectory | None = None
                      ) -> Path:
    """Populate the output directory: metadata, state CSV, trajectory CSV,
    coupling report, VTK of the final field."""
    out = Path(config.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metadata.txt").write_text(
        f"intercell version: {VERSION}\n"
        f"units: {UNIT_CONVENTIONS}\n"
        f"seed: {config.seed}\n\n"
        f"{config.to_ini()}")
    mesh = disc.hierarchy.meshes[disc.finest]
    if trajectory is not None:
        trajectory.write_csv(out / "trajectory.csv")
        state = trajectory.final_state
    else:
        state = result.state
    out_io.export_state_csv(out / "state.csv", state.u, state.v)
    out_io.export_vtk(out / "final.vtk", mesh, {"il2_nM": state.u})
    if result is not None:
        result.report.write_csv(out / "coupling.csv")
        (out / "coupling.txt").write_text(str(result.report) + "\n")
    return out


def run_comparison(configs: list[RunConfig], labels: list[str] | None = None,
                   out_path=None) -> list[dict]:
    """Run each configuration (stationary or transient per its time section)
    and tabulate totals; per-run failures are recorded and the campaign
    continues.  Returns one row dict per config."""
    labels = labels or [f"run{i}" for i in range(len(configs))]
    rows = []
    for label, cfg in zip(labels, configs):
        row = {"label": label, "approach": cfg.approach, "level": cfg.level,
               "n_cells": cfg.n ** 3, "dt": ("" if cfg.stationary else cfg.dt),
               "max_iter_fixedpoint": cfg.newton.max_iter_fixedpoint or 0,
               "sigma_n": "", "sigma_s": "", "s_mean": "", "wall_time": "",
               "status": "ok", "error": ""}
        t0 = time.perf_counter()
        try:
            if cfg.stationary:
                res = run_stationary(cfg)
                stats = res.stats
            else:
                stats = run_transient(cfg).totals
            row["sigma_n"] = stats.newton_steps
            row["sigma_s"] = stats.krylov_total
            row["s_mean"] = float(stats.krylov_avg)
            row["wall_time"] = time.perf_counter() - t0
        except Exception as exc:
            row["status"] = "failed"
            row["error"] = str(exc)
        rows.append(row)
    if out_path is not None:
        header = ["label", "approach", "level", "n_cells", "dt",
                  "max_iter_fixedpoint", "sigma_n", "sigma_s", "s_mean",
                  "wall_time", "status", "error"]
        out_io.write_csv(out_path, header, [[r[h] for h in header]
                                            for r in rows])
    return rows
