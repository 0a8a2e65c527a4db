"""Command-line front end: configuration, experiment orchestration, CSV output.

Configuration files are flat ``key = value`` lines with dotted section
prefixes (``model.alpha = 3``); unknown keys are rejected with their line
number.  All numeric CSV fields are serialized with 17 significant digits so
files round-trip IEEE-754 doubles exactly and repeated runs are
byte-identical.  Exit codes: 0 completed, 2 blow-up detected (a scientific
outcome, not a failure), 1 error.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import blowup as bl
from . import diagnostics as diag
from . import equilibrium as eq
from . import inequalities as ineq
from .errors import ConfigError
from .grid import DensityState, GridFunction, WeightSpec, make_grid, project_density, quadrature
from .solver import (
    EVENT_BLOWUP,
    EVENT_COMPLETED,
    ModelParams,
    SolverControls,
    Trajectory,
    evolve,
)

__all__ = ["main", "parse_config_text", "RunConfig"]


# ---------------------------------------------------------------------------
# configuration

_KNOWN_KEYS = {
    "model.alpha": float,
    "model.beta": float,
    "model.lambda": float,
    "grid.n_cells": int,
    "initial.family": str,
    "initial.mass": float,
    "initial.e0": float,
    "initial.amplitude": float,
    "initial.table": str,
    "controls.dt": float,
    "controls.t_end": float,
    "controls.record_every": int,
    "controls.negativity_tol": float,
    "controls.blowup_l2_threshold": float,
    "controls.blowup_cell_fraction": float,
    "output.dir": str,
    "figure1.alphas": "floatlist",
    "figure1.lambdas": "floatlist",
    "figure1.beta": float,
    "figure1.mu": float,
    "figure1.e0_min": float,
    "figure1.e0_max": float,
    "figure1.e0_count": int,
    "figure1.e0_scale": str,
    "sweep.alpha": "floatlist",
    "sweep.beta": "floatlist",
    "sweep.lambda": "floatlist",
    "sweep.mu": "floatlist",
    "sweep.e0": "floatlist",
    "sweep.simulate": "bool",
    "inequalities.count": int,
}


def _convert(key: str, raw: str, lineno: int):
    kind = _KNOWN_KEYS[key]
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind is str:
            return raw
        if kind == "floatlist":
            return [float(tok) for tok in raw.split(",") if tok.strip()]
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: cannot parse value {raw!r} for key {key!r}"
        ) from None
    raise ConfigError(f"line {lineno}: unhandled key kind for {key!r}")


def parse_config_text(text: str) -> Dict[str, object]:
    """Parse the flat key = value format; unknown keys raise with line numbers."""
    out: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _convert(key, raw, lineno)
    return out


@dataclass
class RunConfig:
    """Validated configuration of one simulation run."""

    params: ModelParams
    n_cells: int = 400
    family: str = "uniform"
    mass: float = 1.0
    e0: Optional[float] = None
    amplitude: Optional[float] = None
    table: Optional[str] = None
    dt: float = 1e-3
    t_end: float = 1.0
    record_every: int = 100
    negativity_tol: float = 1e-12
    blowup_l2_threshold: Optional[float] = None
    blowup_cell_fraction: float = 0.5

    def controls(self) -> SolverControls:
        return SolverControls(
            dt=self.dt,
            t_end=self.t_end,
            negativity_tol=self.negativity_tol,
            blowup_l2_threshold=self.blowup_l2_threshold,
            blowup_cell_fraction=self.blowup_cell_fraction,
            record_every=self.record_every,
        )


def _require(cfg: Dict[str, object], key: str):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}")
    return cfg[key]


def build_run_config(cfg: Dict[str, object], cells_override: Optional[int]) -> RunConfig:
    params = ModelParams(
        alpha=float(_require(cfg, "model.alpha")),
        beta=float(_require(cfg, "model.beta")),
        lam=float(_require(cfg, "model.lambda")),
    )
    rc = RunConfig(params=params)
    rc.n_cells = int(cfg.get("grid.n_cells", rc.n_cells))
    if cells_override is not None:
        rc.n_cells = cells_override
    rc.family = str(cfg.get("initial.family", rc.family))
    if rc.family not in ("uniform", "bump", "steady", "custom-table"):
        raise ConfigError(f"unknown initial.family {rc.family!r}")
    rc.mass = float(cfg.get("initial.mass", rc.mass))
    if rc.mass <= 0.0:
        raise ConfigError("initial.mass must be positive")
    rc.e0 = cfg.get("initial.e0")
    rc.amplitude = cfg.get("initial.amplitude")
    rc.table = cfg.get("initial.table")
    rc.dt = float(cfg.get("controls.dt", rc.dt))
    rc.t_end = float(_require(cfg, "controls.t_end"))
    rc.record_every = int(cfg.get("controls.record_every", rc.record_every))
    rc.negativity_tol = float(cfg.get("controls.negativity_tol", rc.negativity_tol))
    rc.blowup_l2_threshold = cfg.get("controls.blowup_l2_threshold")
    rc.blowup_cell_fraction = float(
        cfg.get("controls.blowup_cell_fraction", rc.blowup_cell_fraction)
    )
    rc.controls()  # validate ranges now, before any computation
    return rc


def initial_state(rc: RunConfig) -> DensityState:
    grid = make_grid(rc.n_cells)
    if rc.family == "uniform":
        return project_density(lambda w: np.ones_like(w), grid, target_mass=rc.mass)
    if rc.family == "bump":
        if rc.e0 is None:
            raise ConfigError("initial.family = bump requires initial.e0")
        return bl.bump_density(grid, rc.mass, float(rc.e0))
    if rc.family == "steady":
        if rc.amplitude is not None:
            profile = eq.steady_profile(float(rc.amplitude), rc.params, grid)
        else:
            c, _ = eq.solve_amplitude_for_mass(rc.mass, rc.params, grid)
            profile = eq.steady_profile(c, rc.params, grid)
        return DensityState(profile.values, time=0.0)
    if rc.family == "custom-table":
        if not rc.table:
            raise ConfigError("initial.family = custom-table requires initial.table")
        rows = np.loadtxt(rc.table, delimiter=",", skiprows=1, ndmin=2)
        if rows.shape != (grid.n_cells, 2):
            raise ConfigError(
                f"table {rc.table!r} must have {grid.n_cells} rows of w,f"
            )
        if not np.allclose(rows[:, 0], grid.centers, atol=1e-9):
            raise ConfigError("table abscissae do not match the grid centers")
        return DensityState(GridFunction(grid, rows[:, 1]), time=0.0)
    raise ConfigError(f"unknown initial.family {rc.family!r}")


# ---------------------------------------------------------------------------
# CSV helpers


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


TRAJECTORY_COLUMNS = [
    "t", "tau", "mass", "mean", "energy", "temperature", "l2_sq", "l2p_sq",
    "bbound_lower", "energy_rhs", "dirichlet_form",
]


def trajectory_rows(traj: Trajectory, params: ModelParams) -> List[List[float]]:
    p_star = (
        (params.alpha - 2.0) / (params.alpha + 1.0) if params.alpha > 2.0 else 0.0
    )
    rows = []
    for snap in traj.snapshots:
        rep = diag.moments(snap, params)
        l2p = quadrature(snap.function, WeightSpec(p=p_star, q=2.0))
        bb = (
            diag.second_moment_lower_bound(rep.mass, rep.l2_sq)
            if rep.mass > 0.0 and rep.l2_sq > 0.0
            else 0.0
        )
        rows.append(
            [
                snap.time,
                params.lam * snap.time,
                rep.mass,
                rep.mean,
                rep.energy,
                rep.temperature,
                rep.l2_sq,
                l2p,
                bb,
                diag.energy_rhs(snap, params),
                diag.dirichlet_form(snap),
            ]
        )
    return rows


# ---------------------------------------------------------------------------
# subcommands


def run_simulate(cfg: Dict[str, object], out_dir: Path, cells: Optional[int]) -> int:
    rc = build_run_config(cfg, cells)
    state = initial_state(rc)
    traj = evolve(state, rc.params, rc.controls())
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "trajectory.csv", TRAJECTORY_COLUMNS,
              trajectory_rows(traj, rc.params))
    write_csv(
        out_dir / "events.csv",
        ["t", "event_kind", "detail"],
        [[ev.time, ev.kind, ev.detail.replace(",", ";")] for ev in traj.events],
    )
    kind = traj.terminal_event.kind if traj.terminal_event else ""
    if kind == EVENT_COMPLETED:
        return 0
    if kind == EVENT_BLOWUP:
        return 2
    return 1


def run_steady(cfg: Dict[str, object], out_dir: Path, cells: Optional[int]) -> int:
    params = ModelParams(
        alpha=float(_require(cfg, "model.alpha")),
        beta=float(_require(cfg, "model.beta")),
        lam=float(_require(cfg, "model.lambda")),
    )
    n = int(cfg.get("grid.n_cells", 400))
    if cells is not None:
        n = cells
    grid = make_grid(n)
    mass = float(cfg.get("initial.mass", 1.0))
    c, condensate = eq.solve_amplitude_for_mass(mass, params, grid)
    profile = eq.steady_profile(c, params, grid)
    try:
        mu_c = eq.critical_mass(params, grid)
    except Exception:
        mu_c = None
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        out_dir / "steady.csv",
        ["w", "f"],
        list(zip(grid.centers, profile.values.values)),
    )
    write_csv(
        out_dir / "steady_summary.csv",
        ["amplitude", "s", "mass", "condensate_mass", "critical_mass",
         "max_residual_flux"],
        [[profile.amplitude, profile.s, profile.mass, condensate, mu_c,
          eq.residual_flux(profile, params)]],
    )
    return 0


def run_blowup_report(cfg: Dict[str, object], out_dir: Path) -> int:
    params = ModelParams(
        alpha=float(_require(cfg, "model.alpha")),
        beta=float(_require(cfg, "model.beta")),
        lam=float(_require(cfg, "model.lambda")),
    )
    mu = float(cfg.get("initial.mass", 1.0))
    e0 = float(_require(cfg, "initial.e0"))
    label = bl.classify(params, mu, e0)
    row = [params.alpha, params.beta, params.lam, mu, e0, label.kind]
    if params.alpha > 2.0:
        k = bl.constants(params.alpha)
        row += [
            k.c_alpha, k.d_alpha, k.s_alpha, k.gamma,
            bl.lambda_coefficient(e0, mu, params),
            bl.energy_rate_indicator(e0, mu, params),
            bl.temperature_rate_indicator(mu, e0, params) if 0 < e0 < 1 else None,
            label.e_critical, label.mass_threshold, label.t_bar,
            label.p_star, label.q_max,
        ]
    else:
        row += [None] * 12
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        out_dir / "blowup_report.csv",
        ["alpha", "beta", "lambda", "mu", "e0", "regime", "c_alpha", "d_alpha",
         "s_alpha", "gamma", "Lambda", "phi", "psi", "e_c", "mu_star", "t_bar",
         "p_star", "q_max"],
        [row],
    )
    return 0


def figure1_defaults() -> Dict[str, object]:
    return {
        "alphas": [3.0, 4.0],
        "lambdas": [0.025, 0.05, 0.1],
        "beta": 1.0,
        "mu": 1.0,
        "e0_min": 1e-7,
        "e0_max": None,  # filled as mu (1 - 1e-6)
        "e0_count": 160,
        "e0_scale": "log",
    }


def run_figure1(cfg: Dict[str, object], out_dir: Path) -> int:
    d = figure1_defaults()
    alphas = cfg.get("figure1.alphas", d["alphas"])
    lambdas = cfg.get("figure1.lambdas", d["lambdas"])
    beta = float(cfg.get("figure1.beta", d["beta"]))
    mu = float(cfg.get("figure1.mu", d["mu"]))
    e0_min = float(cfg.get("figure1.e0_min", d["e0_min"]))
    e0_max = float(cfg.get("figure1.e0_max", mu * (1.0 - 1e-6)))
    count = int(cfg.get("figure1.e0_count", d["e0_count"]))
    scale = str(cfg.get("figure1.e0_scale", d["e0_scale"]))
    if not (0.0 < e0_min < e0_max < mu):
        raise ConfigError("need 0 < e0_min < e0_max < mu")
    if scale == "log":
        e0_grid = np.geomspace(e0_min, e0_max, count)
    elif scale == "linear":
        e0_grid = np.linspace(e0_min, e0_max, count)
    else:
        raise ConfigError(f"unknown e0_scale {scale!r}")

    curve_rows = []
    ec_rows = []
    for alpha in alphas:
        for lam in lambdas:
            if alpha <= 2.0:
                ec_rows.append([alpha, lam, None, "skipped_out_of_regime"])
                continue
            params = ModelParams(alpha=alpha, beta=beta, lam=lam)
            for e0 in e0_grid:
                curve_rows.append(
                    [alpha, lam, float(e0),
                     bl.energy_rate_indicator(float(e0), mu, params)]
                )
            ec_rows.append([alpha, lam, bl.critical_energy(mu, params), "ok"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "phi_curves.csv", ["alpha", "lambda", "E0", "phi"], curve_rows)
    write_csv(out_dir / "critical_energy.csv", ["alpha", "lambda", "e_c", "status"],
              ec_rows)
    return 0


SWEEP_COLUMNS = [
    "alpha", "beta", "lambda", "mu", "e0", "regime", "phi", "psi", "e_c",
    "mu_star", "t_bar", "p_star", "q_max", "outcome", "error",
]


def _sweep_point(
    point: Tuple[float, float, float, float, float],
    simulate: bool,
    cfg: Dict[str, object],
    cells: Optional[int],
) -> List:
    alpha, beta, lam, mu, e0 = point
    row: List = list(point)
    try:
        params = ModelParams(alpha=alpha, beta=beta, lam=lam)
        label = bl.classify(params, mu, e0)
        phi = psi = None
        if alpha > 2.0:
            if 0.0 < e0 < mu:
                phi = bl.energy_rate_indicator(e0, mu, params)
            if 0.0 < e0 < 1.0:
                psi = bl.temperature_rate_indicator(mu, e0, params)
        row += [
            label.kind, phi, psi, label.e_critical, label.mass_threshold,
            label.t_bar, label.p_star, label.q_max,
        ]
        outcome = ""
        if simulate:
            rc = build_run_config(
                {
                    "model.alpha": alpha,
                    "model.beta": beta,
                    "model.lambda": lam,
                    "initial.family": "bump",
                    "initial.mass": mu,
                    "initial.e0": e0,
                    **{
                        k: v
                        for k, v in cfg.items()
                        if k.startswith(("grid.", "controls."))
                    },
                },
                cells,
            )
            traj = evolve(initial_state(rc), params, rc.controls())
            outcome = traj.terminal_event.kind if traj.terminal_event else ""
        row += [outcome, ""]
    except Exception as exc:  # per-point failures never abort the sweep
        row += [None] * (len(SWEEP_COLUMNS) - len(point) - 1)
        row += [f"{type(exc).__name__}: {exc}".replace(",", ";")]
    return row


def run_sweep(cfg: Dict[str, object], out_dir: Path, cells: Optional[int]) -> int:
    axes = [
        [float(x) for x in cfg.get("sweep.alpha", [])],
        [float(x) for x in cfg.get("sweep.beta", [])],
        [float(x) for x in cfg.get("sweep.lambda", [])],
        [float(x) for x in cfg.get("sweep.mu", [])],
        [float(x) for x in cfg.get("sweep.e0", [])],
    ]
    simulate = bool(cfg.get("sweep.simulate", False))
    points = list(product(*axes))
    rows: List[List] = []
    if points:
        with ThreadPoolExecutor(max_workers=min(4, max(1, len(points)))) as pool:
            rows = list(
                pool.map(lambda pt: _sweep_point(pt, simulate, cfg, cells), points)
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, rows)
    return 0


INEQUALITY_P_VALUES = {
    "poincare": (0.0, 0.25, 0.5),
    "nash_p": (0.25, 0.5),
    "gn": (2.5, 3.0, 3.5),
}


def _witness_functions() -> List[ineq.TestFunction]:
    return [
        ineq.TestFunction("poly", np.array([1.0]), nonneg=True, label="witness:const"),
        ineq.TestFunction("poly", np.array([0.0, 1.0]), label="witness:linear"),
        ineq.TestFunction("poly", np.array([0.0, 0.0, 1.0]), nonneg=True,
                          label="witness:quadratic"),
    ]


def inequality_reports(
    phi: ineq.TestFunction, grid_n: int = 800
) -> List[ineq.InequalityReport]:
    """All inequality checks for one test function, constrained variants included."""
    reports: List[ineq.InequalityReport] = []
    for p in INEQUALITY_P_VALUES["poincare"]:
        reports.append(ineq.poincare_check(phi, 1.0, p))
    for base in (
        ineq.nash_check(phi),
        *[ineq.nash_p_check(phi, p) for p in INEQUALITY_P_VALUES["nash_p"]],
        ineq.l4_nash_check(phi),
    ):
        reports.append(base)
        cv = ineq.constrained_variant(base)
        if cv is not None:
            reports.append(cv)
    for p in INEQUALITY_P_VALUES["gn"]:
        reports.append(ineq.gn_check(phi, p))
        reports.append(ineq.interpolation_check(phi, p))
    reports.append(ineq.log_sobolev_check(phi))
    if phi.nonneg:
        reports.append(ineq.second_moment_l1_check(phi))
        grid = make_grid(grid_n)
        vals = np.maximum(np.asarray(phi(grid.centers), dtype=float), 0.0)
        reports.append(
            ineq.rearrangement_energy_check(GridFunction(grid, vals))
        )
    return reports


def run_inequalities(seed: int, count: int, out_dir: Path) -> int:
    if count < 1:
        raise ConfigError("inequalities.count must be >= 1")
    functions = _witness_functions()
    half = count // 2
    functions += ineq.random_test_functions(
        seed, count - half, ineq.TestFunctionSpec(max_degree=8, min_degree=1)
    )
    functions += [
        ineq.TestFunction("poly", f.coeffs, nonneg=True,
                          label=f"rand-nonneg:{i:04d}")
        for i, f in enumerate(
            ineq.random_test_functions(
                seed + 1, half,
                ineq.TestFunctionSpec(max_degree=8, min_degree=0, nonneg=True),
            )
        )
    ]
    rows: List[List] = []
    max_ratio: Dict[str, float] = {}
    for phi in functions:
        for rep in inequality_reports(phi):
            tag = rep.name
            if "p" in rep.constants_used and rep.name in ("nash_p", "gn",
                                                          "interpolation"):
                tag = f"{rep.name}[p={rep.constants_used['p']:g}]"
            elif rep.name == "poincare":
                tag = f"poincare[p={rep.constants_used['p']:g}]"
            rows.append(
                [phi.label, tag, rep.lhs, rep.rhs, rep.ratio, rep.regime, rep.holds]
            )
            if math.isfinite(rep.ratio):
                max_ratio[tag] = max(max_ratio.get(tag, 0.0), rep.ratio)
    for tag in sorted(max_ratio):
        rows.append(["SUMMARY", tag, None, None, max_ratio[tag], "max_ratio", None])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(
        out_dir / "inequalities.csv",
        ["function", "inequality", "lhs", "rhs", "ratio", "regime", "holds"],
        rows,
    )
    return 0


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fplab",
        description="Numerical laboratory for a nonlinear consensus "
        "Fokker-Planck equation with degenerate diffusion",
    )
    parser.add_argument("--config", type=Path, default=None, help="config file path")
    parser.add_argument("--out", type=Path, default=Path("fplab_out"),
                        help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    parser.add_argument("--cells", type=int, default=None,
                        help="override grid.n_cells")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "steady", "blowup", "figure1", "sweep"):
        sub.add_parser(name)
    p_ineq = sub.add_parser("inequalities")
    p_ineq.add_argument("--count", type=int, default=None,
                        help="number of random test functions")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg: Dict[str, object] = {}
        if args.config is not None:
            cfg = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
        out_dir = Path(args.out)
        if args.command == "simulate":
            return run_simulate(cfg, out_dir, args.cells)
        if args.command == "steady":
            return run_steady(cfg, out_dir, args.cells)
        if args.command == "blowup":
            return run_blowup_report(cfg, out_dir)
        if args.command == "figure1":
            return run_figure1(cfg, out_dir)
        if args.command == "sweep":
            return run_sweep(cfg, out_dir, args.cells)
        if args.command == "inequalities":
            count = args.count
            if count is None:
                count = int(cfg.get("inequalities.count", 200))
            return run_inequalities(args.seed, count, out_dir)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"fplab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
