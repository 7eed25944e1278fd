"""Experiment drivers behind the command line: one function per subcommand."""
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import src.imethod as imethod
import src.morawetz as morawetz
import src.oracle as oracle
import src.solver as solver
import src.spectral as spectral
import src.utils as utils
from src.config import ExperimentConfig, dump_experiment
from src.errors import OracleViolation
from src.monitoring import logger
from src.regions import region_bound_check
from src.scaling import plan_parameters
from src.schemas import DataKind, IMultiplierSpec, MPolicy, ScalingPlan, WeightSpec
from src.spectral import Field, Grid

TRAJECTORY_PLOT = """\
set datafile separator ","
set key autotitle columnhead
set xlabel "t"
set terminal pngcairo size 1200,800
set output "trajectory.png"
set multiplot layout 2,2
plot "trajectory.csv" using 1:2 with lines
plot "trajectory.csv" using 1:3 with lines
plot "trajectory.csv" using 1:4 with lines
{extra}unset multiplot
"""

SWEEP_PLOT = """\
set datafile separator ","
set key autotitle columnhead
set logscale xy
set xlabel "N"
set terminal pngcairo size 900,600
set output "sweep.png"
plot "sweep.csv" using 1:5 with linespoints, \\
     "sweep.csv" using 1:7 with linespoints, \\
     {reference} * x**(-1.5) title "N^-3/2" dashtype 2, \\
     {reference} * x**(-2) title "N^-2" dashtype 3
"""

MORAWETZ_PLOT = """\
set datafile separator ","
set key autotitle columnhead
set xlabel "t"
set terminal pngcairo size 900,600
set output "morawetz_terms.png"
plot for [col=3:6] "morawetz_terms.csv" using 1:col with lines
"""


def lattice_cutoff(grid: Grid, units: float) -> float:
    """Wavenumber of ``units`` lattice spacings 2 pi / L."""
    return float(units) * 2 * math.pi / grid.L


def make_grid(config: ExperimentConfig) -> Grid:
    return spectral.make_grid(config.grid.n, config.grid.L)


def initial_data(
    config: ExperimentConfig, grid: Grid, default: DataKind = DataKind.gaussian
) -> Field:
    data = config.data
    if (data.kind or default) is DataKind.gaussian:
        return spectral.synthesize_gaussian(grid, data.A, data.sigma, data.x0, data.v)
    u0 = spectral.synthesize_random_hs(grid, data.s, data.seed, data.A)
    if data.normalize_hs is not None:
        u0 = spectral.normalize_sobolev(u0, data.s, data.normalize_hs)
    return u0


def standard_suite(grid: Grid) -> Dict[str, Field]:
    """Named initial data shared by the Morawetz and acceptance runs."""
    sigma = min(1.0, grid.L / 8)
    return {
        "gaussian_rest": spectral.synthesize_gaussian(grid, 1.0, sigma),
        "gaussian_moving": spectral.synthesize_gaussian(
            grid, 1.0, sigma, (0.0, 0.0), (1.0, 0.5)
        ),
        "random_hs": spectral.normalize_sobolev(
            spectral.synthesize_random_hs(grid, 0.3, seed=0), 0.3, 1.0
        ),
    }


def multiplier_spec(config: ExperimentConfig, grid: Grid) -> IMultiplierSpec:
    return IMultiplierSpec(s=config.imethod.s, N=lattice_cutoff(grid, config.imethod.N))


def weight_spec(config: ExperimentConfig, grid: Grid) -> Tuple[WeightSpec, bool]:
    fixed = config.morawetz.M if config.morawetz.M_policy is MPolicy.fixed else None
    M, clamped = morawetz.morawetz_scale(config.solver.T, grid.L, fixed)
    return WeightSpec(M=M), clamped


def _output_directory(config: ExperimentConfig) -> Path:
    directory = Path(config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _observers(
    ispec: IMultiplierSpec, weight: WeightSpec, dealias: bool, nonlinear: bool
):
    def modified(t: float, u: Field) -> Dict[str, float]:
        return {
            "E_Iu": imethod.modified_energy(u, ispec, dealias, nonlinear),
            "commutator_l2": spectral.lp_norm(
                imethod.commutator_field(u, ispec, dealias), 2
            ),
        }

    return [modified, morawetz.action_observer(weight)]


def _relative_drift(values: List[float]) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0 or values[0] == 0:
        return float(np.abs(values - values[0]).max()) if values.size else 0.0
    return float(np.abs(values - values[0]).max() / abs(values[0]))


def cmd_run(config: ExperimentConfig, threads: int = 1) -> Dict[str, Path]:
    """One trajectory with its diagnostics; returns the artifact paths by name."""
    grid = make_grid(config)
    cfg = config.solver.solver_config()
    ispec = multiplier_spec(config, grid)
    weight, clamped = weight_spec(config, grid)
    u0 = initial_data(config, grid)
    traj = solver.evolve(u0, cfg, _observers(ispec, weight, cfg.dealias, cfg.nonlinear))

    directory = _output_directory(config)
    formats = set(config.output.formats)
    records = traj.records
    summary = {
        "n": grid.n,
        "L": grid.L,
        "dt": cfg.dt,
        "T": cfg.T,
        "samples": len(traj),
        "complete": traj.complete,
        "mass_relative_drift": _relative_drift([r.mass for r in records]),
        "energy_relative_drift": _relative_drift([r.energy for r in records]),
        "E_Iu_max_increment": float(
            max(abs(r.E_Iu - records[0].E_Iu) for r in records)
        ),
        "l4x4": records[-1].l4x4_accum,
        "s": ispec.s,
        "N": ispec.N,
        "M": weight.M,
        "M_clamped": clamped,
    }
    artifacts: Dict[str, Path] = {}
    if "csv" in formats:
        artifacts["trajectory"] = traj.to_csv(directory / "trajectory.csv")
    if "json" in formats:
        artifacts["summary"] = utils.write_json(summary, directory / "summary.json")
    if "gnuplot" in formats:
        extra = 'plot "trajectory.csv" using 1:5 with lines\n'
        path = directory / "trajectory.gp"
        path.write_text(TRAJECTORY_PLOT.format(extra=extra))
        artifacts["plot"] = path
    if "config" in formats:
        path = directory / "config.env"
        path.write_text(dump_experiment(config))
        artifacts["config"] = path
    if "snapshot" in formats:
        artifacts["snapshot"] = spectral.write_snapshot(
            traj.snapshots[-1], directory / "snapshot_final.bin"
        )
    logger.info("Run artifacts written", extra={"files": sorted(artifacts)})
    return artifacts


def cmd_sweep_n(config: ExperimentConfig, threads: int = 1) -> Dict[str, Path]:
    grid = make_grid(config)
    cfg = config.solver.solver_config()
    cutoffs = imethod.sweep_cutoffs(grid, config.imethod.N_list)
    report = imethod.increment_sweep(
        initial_data(config, grid, DataKind.random_hs),
        config.imethod.s,
        cutoffs,
        cfg,
        workers=threads,
    )

    directory = _output_directory(config)
    columns = [
        "N",
        "amplitude_scale",
        "sup_increment",
        "drift_baseline",
        "commutator_increment",
        "slope_so_far",
        "commutator_l1l2",
    ]
    frame = pd.DataFrame([row.dict() for row in report.rows], columns=columns)
    artifacts: Dict[str, Path] = {}
    sweep_csv = directory / "sweep.csv"
    frame.to_csv(sweep_csv, index=False, float_format="%.17g")
    artifacts["sweep"] = sweep_csv
    artifacts["summary"] = utils.write_json(report, directory / "summary.json")
    if "gnuplot" in config.output.formats and report.rows:
        reference = report.rows[0].commutator_increment * report.rows[0].N**1.5
        path = directory / "sweep.gp"
        path.write_text(SWEEP_PLOT.format(reference=f"{reference:.17g}"))
        artifacts["plot"] = path
    if not report.complete:
        logger.warning(
            "Sweep finished with partial results", extra={"failure": report.failure}
        )
    return artifacts


def positivity_rows(
    series: List[Tuple[float, float, Any]], snapshots: List[Field]
) -> List[Dict[str, Any]]:
    rows = []
    for (t, action, terms), u in zip(series, snapshots):
        scale = morawetz.field_scale(u)
        rows.append(
            {
                "t": t,
                "action": action,
                "term_bilaplacian": terms.term_bilaplacian,
                "term_hessian": terms.term_hessian,
                "term_nonlinear": terms.term_nonlinear,
                "total": terms.total,
                "positive": terms.positivity(scale),
            }
        )
    return rows


def cmd_morawetz(config: ExperimentConfig, threads: int = 1) -> Dict[str, Path]:
    """Interaction inequalities for u and Iu plus the per-sample term breakdown."""
    grid = make_grid(config)
    cfg = config.solver.solver_config()
    ispec = multiplier_spec(config, grid)
    weight, _ = weight_spec(config, grid)
    fixed = config.morawetz.M if config.morawetz.M_policy is MPolicy.fixed else None
    traj = solver.evolve(initial_data(config, grid), cfg)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        u_level = pool.submit(morawetz.interaction_inequality_check, traj, cfg.T, fixed)
        iu_level = pool.submit(
            morawetz.almost_morawetz_check,
            traj,
            ispec,
            cfg.T,
            config.morawetz.epsilon,
            config.morawetz.suite_constant,
            None,
            fixed,
        )
        series = pool.submit(morawetz.action_series, traj, weight)
        identity = (
            pool.submit(morawetz.action_identity_check, traj, weight)
            if len(traj) >= 3
            else None
        )
        rows = positivity_rows(series.result(), traj.snapshots)
        report = {
            "u_level": u_level.result(),
            "Iu_level": iu_level.result(),
            "identity": identity.result() if identity else None,
            "positivity": {
                "all_positive": all(row["positive"] for row in rows),
                "samples": len(rows),
            },
        }

    directory = _output_directory(config)
    artifacts = {"morawetz": utils.write_json(report, directory / "morawetz.json")}
    terms_csv = directory / "morawetz_terms.csv"
    pd.DataFrame(rows).to_csv(terms_csv, index=False, float_format="%.17g")
    artifacts["terms"] = terms_csv
    if "gnuplot" in config.output.formats:
        path = directory / "morawetz_terms.gp"
        path.write_text(MORAWETZ_PLOT)
        artifacts["plot"] = path
    return artifacts


def cmd_regions(config: ExperimentConfig, threads: int = 1) -> Dict[str, Path]:
    """Region reports restricted to the frequencies the lattice can represent."""
    grid = make_grid(config)
    ispec = multiplier_spec(config, grid)
    directory = _output_directory(config)
    artifacts: Dict[str, Path] = {}
    for region in (1, 2, 3, 4):
        report = region_bound_check(
            ispec,
            region,
            config.imethod.region_samples,
            config.imethod.region_seed,
            xi_min=2 * math.pi / grid.L,
            xi_max=math.pi * grid.n / grid.L,
            workers=threads,
        )
        artifacts[f"region_{region}"] = utils.write_json(
            report, directory / f"region_{region}.json"
        )
    return artifacts


def cmd_plan(config: ExperimentConfig, out: Optional[Path] = None) -> ScalingPlan:
    planner = config.planner
    plan = plan_parameters(
        planner.s,
        planner.T0,
        planner.m0,
        planner.epsilon,
        C_prime=planner.C_prime,
        C0=planner.C0,
        delta_exp=planner.delta_exp,
    )
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        utils.write_json(plan, Path(out) / "plan.json")
    return plan


def cmd_oracle_validate(out: Optional[Path] = None) -> List:
    reports = oracle.run_battery()
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        utils.write_json_lines(reports, Path(out) / "oracle.jsonl")
    failed = [report for report in reports if not report.passed]
    if failed:
        raise OracleViolation(f"{len(failed)} oracle comparisons failed", failed)
    return reports
