"""``gatebench`` command-line interface.

Subcommands read a JSON scenario whose field names carry their units
(``t2_s``, ``phi_rad``) and write a deterministic JSON report plus plot-ready
CSV files into ``--out``.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 malformed or missing data file.
"""
from __future__ import annotations

import functools
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from gatebench import __version__
from gatebench._parallel import default_jobs
from gatebench.analysis import analyze_gst, gst_t2_sweep, run_gst
from gatebench.calibrate import (
    HALF_PI,
    MiscalModel,
    correct_controls,
    default_k_grid,
    default_phi_grid,
    residual_model,
    score_map,
)
from gatebench.drb import (
    ArrayScenario,
    analyze_drb,
    generate_drb_circuits,
    run_array,
    run_circuits,
    run_drb,
)
from gatebench.errors import ConfigError, DataFormatError, GateBenchError, NumericalError
from gatebench.formats import (
    CALIBRATION_COLUMNS,
    DECAY_COLUMNS,
    calibration_rows,
    decay_rows,
    drb_to_dict,
    estimate_to_dict,
    read_dataset,
    write_dataset,
    write_estimate_csvs,
    write_json,
    write_rows_csv,
)
from gatebench.gst import GstDesign
from gatebench.noise import NoiseParams, analytic_gate_fidelity

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DATA = 4


# --------------------------------------------------------------------------------------------
# scenario schema
# --------------------------------------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NoiseConfig(_Strict):
    t1_s: float = math.inf
    t2_s: float = math.inf
    gate_time_s: float = 10e-6
    p01: float = Field(0.0, ge=0.0, le=1.0)
    p10: float = Field(0.0, ge=0.0, le=1.0)
    prep_error: float = Field(0.0, ge=0.0, le=1.0)

    def to_params(self) -> NoiseParams:
        return NoiseParams(self.t1_s, self.t2_s, self.gate_time_s, self.p01, self.p10, self.prep_error)

    @model_validator(mode="after")
    def _physical(self):
        try:
            self.to_params()
        except GateBenchError as exc:
            raise ValueError(str(exc)) from exc
        return self


class DrbConfig(_Strict):
    depths: list[int]
    circuits_per_depth: int = Field(25, ge=1)
    shots: int = Field(1000, ge=1)
    resamples: int = Field(200, ge=0)
    identity_weight: int = Field(0, ge=0)

    @field_validator("depths")
    @classmethod
    def _depths(cls, v):
        if not v or any(m < 0 for m in v):
            raise ValueError("depths must be a nonempty list of nonnegative integers")
        return v


class GstConfig(_Strict):
    gate_labels: list[str] = ["X90", "Y90"]
    fiducials: list[list[str]] = [[], ["X90"], ["Y90"], ["X90", "X90"]]
    germs: list[list[str]] = [["Y90", "X90"], ["X90", "Y90"]]
    max_reps: int = Field(3, ge=1)
    shots: int = Field(1000, ge=1)
    resamples: int = Field(100, ge=0)
    rank: int = Field(4, ge=1, le=4)
    max_iters: int = Field(3000, ge=1)
    tol: float = Field(1e-9, gt=0)
    fix_spam: bool = False
    cond_bound: float = Field(1e6, gt=0)
    t2_sweep_s: list[float] = []

    def design(self) -> GstDesign:
        return GstDesign(
            gate_labels=tuple(self.gate_labels),
            fiducials=tuple(tuple(f) for f in self.fiducials),
            germs=tuple(tuple(g) for g in self.germs),
            max_reps=self.max_reps,
        )

    def mle_options(self) -> dict:
        return {"rank": self.rank, "max_iters": self.max_iters, "tol": self.tol, "fix_spam": self.fix_spam}


class GridConfig(_Strict):
    start: float
    stop: float
    step: float = Field(gt=0)

    def values(self) -> np.ndarray:
        n = int(round((self.stop - self.start) / self.step)) + 1
        if n < 1:
            raise ValueError("grid stop lies before start")
        return np.round(self.start + self.step * np.arange(n), 12)


class MiscalConfig(_Strict):
    k: float = Field(1.0, gt=0)
    phi_rad: float = HALF_PI

    def model(self) -> MiscalModel:
        return MiscalModel(self.k, self.phi_rad)


class CalibrateConfig(_Strict):
    k_grid: Optional[GridConfig] = None
    phi_grid_rad: Optional[GridConfig] = None
    injected: Optional[MiscalConfig] = None
    coherent_only: bool = False
    max_rounds: int = Field(1, ge=1, le=5)
    tol: float = Field(1e-3, gt=0)
    tau_s: float = Field(10e-6, gt=0)
    phi_ctrl_rad: float = HALF_PI

    def grids(self):
        k = default_k_grid() if self.k_grid is None else self.k_grid.values()
        p = default_phi_grid() if self.phi_grid_rad is None else self.phi_grid_rad.values()
        return k, p


class ArrayConfig(_Strict):
    rows: int = Field(5, ge=1)
    cols: int = Field(5, ge=1)
    t2_jitter: float = Field(0.2, ge=0.0, lt=1.0)
    sites: Optional[list[NoiseConfig]] = None
    positions: Optional[list[tuple[int, int]]] = None


class Scenario(_Strict):
    seed: int = 0
    noise: NoiseConfig = NoiseConfig()
    drb: Optional[DrbConfig] = None
    gst: Optional[GstConfig] = None
    calibrate: Optional[CalibrateConfig] = None
    array: Optional[ArrayConfig] = None

    def require(self, section: str):
        value = getattr(self, section)
        if value is None:
            raise ConfigError(f"scenario has no '{section}' section")
        return value


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return Scenario.model_validate(raw)
    except ValidationError as exc:
        lines = [
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
        ]
        raise ConfigError(f"{path}: invalid scenario\n  " + "\n  ".join(lines)) from exc


def config_hash(scenario: Scenario) -> str:
    canonical = json.dumps(scenario.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def provenance(command: str, seed: int, scenario: Scenario | None = None, **extra) -> dict:
    out = {"command": command, "seed": seed, "version": __version__}
    if scenario is not None:
        out["config_sha256"] = config_hash(scenario)
    out.update(extra)
    return out


def array_sites(cfg: ArrayConfig, base: NoiseParams, seed: int) -> ArrayScenario:
    """Explicit per-site noise, or a rows x cols grid with uniformly jittered T2."""
    if cfg.sites is not None:
        per_site = tuple(s.to_params() for s in cfg.sites)
    else:
        n = cfg.rows * cfg.cols
        rng = np.random.default_rng([seed, 7])
        factors = 1.0 + cfg.t2_jitter * rng.uniform(-1.0, 1.0, size=n)
        per_site = tuple(base.replace(t2=min(base.t2 * f, 2 * base.t1)) for f in factors)
    if cfg.positions is not None:
        positions = tuple(tuple(p) for p in cfg.positions)
    elif cfg.sites is None:
        positions = tuple((i // cfg.cols, i % cfg.cols) for i in range(len(per_site)))
    else:
        positions = None
    try:
        return ArrayScenario(per_site, positions)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------------------------
# pipelines (also used directly by tests)
# --------------------------------------------------------------------------------------------


def drb_pipeline(scenario: Scenario, out: Path, seed: int, jobs: int) -> dict:
    cfg = scenario.require("drb")
    params = scenario.noise.to_params()
    circuits = generate_drb_circuits(cfg.depths, cfg.circuits_per_depth, seed, cfg.identity_weight)
    records, analysis = run_drb(circuits, params, cfg.shots, seed, cfg.resamples, jobs)
    report = {
        "provenance": provenance("drb", seed, scenario),
        "drb": drb_to_dict(analysis),
        "analytic_fidelity": analytic_gate_fidelity(params),
        "n_circuits": len(circuits),
    }
    write_dataset(out / "drb_records.json", records)
    write_rows_csv(out / "drb_decay.csv", decay_rows(analysis), DECAY_COLUMNS)
    write_json(out / "drb_report.json", report)
    return report


def fit_drb_pipeline(records_path: Path, out: Path, seed: int, jobs: int, resamples: int) -> dict:
    records = read_dataset(records_path)
    analysis = analyze_drb(records, resamples, seed=(seed, 0, 1), jobs=jobs)
    report = {
        "provenance": provenance("fit-drb", seed, records_sha256=_file_hash(records_path)),
        "drb": drb_to_dict(analysis),
        "n_records": len(records),
    }
    write_rows_csv(out / "drb_decay.csv", decay_rows(analysis), DECAY_COLUMNS)
    write_json(out / "drb_report.json", report)
    return report


def _gst_report(result, params: NoiseParams | None) -> dict:
    gauge = result.transform
    report = {
        "readout": {
            "p01": result.canonical.readout_errors()[0],
            "p10": result.canonical.readout_errors()[1],
            "ci95_p01": result.ci95.get("p01", math.nan),
            "ci95_p10": result.ci95.get("p10", math.nan),
        },
        "fidelity": {
            "linear_inversion": result.linear.fidelities(),
            "pre_gauge": result.mle.fidelities(),
            "post_gauge": result.canonical.fidelities(),
            "ci95": {k.split(".", 1)[1]: v for k, v in result.ci95.items() if k.startswith("fidelity.")},
        },
        "gauge": {
            "u": {"real": gauge.u.real.tolist(), "imag": gauge.u.imag.tolist()},
            "delta_rad": gauge.delta,
            "offdiag_weight": gauge.info.get("offdiag_weight"),
            "delta_degenerate": result.canonical.diagnostics.get("delta", {}).get("degenerate"),
        },
        "mle": {
            "status": result.mle.diagnostics.get("status"),
            "iterations": result.mle.diagnostics.get("iterations"),
            "loglik": result.mle.loglik,
            "clamp_events": result.mle.diagnostics.get("clamp_events"),
        },
        "estimates": {
            "linear_inversion": estimate_to_dict(result.linear),
            "pre_gauge": estimate_to_dict(result.mle),
            "post_gauge": estimate_to_dict(result.canonical),
        },
    }
    if params is not None:
        report["analytic_fidelity"] = analytic_gate_fidelity(params)
    return report


def _write_gst_outputs(out: Path, result) -> None:
    write_estimate_csvs(out, result.mle, "gst_pre_gauge")
    write_estimate_csvs(out, result.canonical, "gst_post_gauge")


SWEEP_COLUMNS = (
    "t2_s", "analytic_fidelity", "fidelity.X90", "ci95.fidelity.X90", "fidelity.Y90",
    "ci95.fidelity.Y90", "p01", "ci95.p01", "p10", "ci95.p10",
)


def gst_pipeline(scenario: Scenario, out: Path, seed: int, jobs: int) -> dict:
    cfg = scenario.require("gst")
    params = scenario.noise.to_params()
    design = cfg.design()
    design.validate()
    records, result = run_gst(params, design, cfg.shots, seed, cfg.resamples, jobs, cfg.mle_options(),
                              cfg.cond_bound)
    report = {"provenance": provenance("gst", seed, scenario), **_gst_report(result, params)}
    write_dataset(out / "gst_records.json", records)
    _write_gst_outputs(out, result)
    if cfg.t2_sweep_s:
        rows = gst_t2_sweep(params, cfg.t2_sweep_s, design, cfg.shots, seed, cfg.resamples, jobs,
                            cfg.mle_options(), cfg.cond_bound)
        columns = [c for c in SWEEP_COLUMNS if c in rows[0]]
        write_rows_csv(out / "gst_t2_sweep.csv", rows, columns)
        report["t2_sweep"] = rows
    write_json(out / "gst_report.json", report)
    return report


def fit_gst_pipeline(records_path: Path, out: Path, seed: int, jobs: int, scenario: Scenario | None) -> dict:
    cfg = (scenario.gst if scenario is not None and scenario.gst is not None else GstConfig())
    records = read_dataset(records_path)
    design = cfg.design()
    design.validate()
    result = analyze_gst(records, design, cfg.resamples, (seed, 1), jobs, cfg.mle_options(), cfg.cond_bound)
    report = {
        "provenance": provenance("fit-gst", seed, scenario, records_sha256=_file_hash(records_path)),
        **_gst_report(result, None),
    }
    _write_gst_outputs(out, result)
    write_json(out / "gst_report.json", report)
    return report


def simulate_drb_pipeline(scenario: Scenario, out: Path, seed: int, with_miscal: bool) -> Path:
    cfg = scenario.require("drb")
    params = scenario.noise.to_params()
    circuits = generate_drb_circuits(cfg.depths, cfg.circuits_per_depth, seed, cfg.identity_weight)
    model = MiscalModel.identity()
    if with_miscal:
        cal = scenario.require("calibrate")
        if cal.injected is None:
            raise ConfigError("calibrate.injected is required with --miscal")
        model = cal.injected.model()
    records = run_circuits(circuits, params, cfg.shots, seed, unitary_fn=model.unitary)
    return write_dataset(out / "drb_records.json", records)


def calibrate_pipeline(scenario: Scenario, records_path: Path, out: Path, seed: int, jobs: int) -> dict:
    cal = scenario.require("calibrate")
    drb_cfg = scenario.drb
    params = scenario.noise.to_params()
    records = read_dataset(records_path)
    k_grid, phi_grid = cal.grids()
    cmap = score_map(records, k_grid, phi_grid, params, coherent_only=cal.coherent_only, jobs=jobs)
    found = cmap.model
    tau, phi_ctrl = correct_controls(cal.tau_s, cal.phi_ctrl_rad, found)
    report = {
        "provenance": provenance("calibrate", seed, scenario, records_sha256=_file_hash(records_path)),
        "argmax": {"k": found.k, "phi_rad": cmap.argmax[1], "score": cmap.best_score},
        "coarse_step": {"k": float(np.min(np.diff(k_grid))) if k_grid.size > 1 else None,
                        "phi_rad": float(np.min(np.diff(phi_grid))) if phi_grid.size > 1 else None},
        "corrections": {"tau_s": tau, "phi_ctrl_rad": phi_ctrl},
        "post_correction": None,
    }
    if cal.injected is not None:
        injected = cal.injected.model()
        residual = residual_model(injected, found)
        circuits = [r.circuit for r in records]
        shots = records[0].shots
        resamples = drb_cfg.resamples if drb_cfg is not None else 0
        _, pre = run_drb(circuits, params, shots, seed, resamples, jobs, unitary_fn=injected.unitary)
        _, post = run_drb(circuits, params, shots, seed, resamples, jobs, unitary_fn=residual.unitary)
        report["post_correction"] = {
            "injected": {"k": injected.k, "phi_rad": injected.phi},
            "residual": {"k": residual.k, "phi_rad": residual.phi},
            "pre_fidelity": pre.fidelity,
            "post_fidelity": post.fidelity,
            "pre": drb_to_dict(pre),
            "post": drb_to_dict(post),
        }
    write_rows_csv(out / "calibration_map.csv", calibration_rows(cmap), CALIBRATION_COLUMNS)
    if cmap.refined is not None:
        write_rows_csv(out / "calibration_map_refined.csv", calibration_rows(cmap.refined), CALIBRATION_COLUMNS)
    write_json(out / "calibration_report.json", report)
    click.echo(json.dumps({"tau_s": tau, "phi_ctrl_rad": phi_ctrl}, sort_keys=True))
    return report


ARRAY_COLUMNS = ("site", "row", "col", "t2_s", "fidelity", "ci95_fidelity", "infidelity",
                 "analytic_fidelity", "p01", "ci95_p01", "p10", "ci95_p10")


def array_pipeline(scenario: Scenario, out: Path, seed: int, jobs: int) -> dict:
    cfg = scenario.require("array")
    drb_cfg = scenario.require("drb")
    sites = array_sites(cfg, scenario.noise.to_params(), seed)
    circuits = generate_drb_circuits(drb_cfg.depths, drb_cfg.circuits_per_depth, seed, drb_cfg.identity_weight)
    result = run_array(sites, circuits, drb_cfg.shots, seed, drb_cfg.resamples, jobs)
    rows = []
    for s, (analysis, params, pos) in enumerate(zip(result.sites, sites.per_site, result.positions)):
        rows.append({
            "site": s,
            "row": int(pos[0]),
            "col": int(pos[1]),
            "t2_s": params.t2,
            "fidelity": analysis.fidelity,
            "ci95_fidelity": analysis.pooled.ci95.get("fidelity", math.nan),
            "infidelity": 1.0 - analysis.fidelity,
            "analytic_fidelity": analytic_gate_fidelity(params),
            "p01": analysis.spam.p01,
            "ci95_p01": analysis.spam.ci_p01,
            "p10": analysis.spam.p10,
            "ci95_p10": analysis.spam.ci_p10,
        })
    analytic_mean = float(np.mean([analytic_gate_fidelity(p) for p in sites.per_site]))
    report = {
        "provenance": provenance("array", seed, scenario),
        "n_sites": sites.n_sites,
        "mean_fidelity": result.mean_fidelity,
        "mean_fidelity_ci95": result.mean_fidelity_ci,
        "analytic_mean_fidelity": analytic_mean,
        "sites": rows,
    }
    write_rows_csv(out / "array_sites.csv", rows, ARRAY_COLUMNS)
    write_json(out / "array_report.json", report)
    return report


def _file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --------------------------------------------------------------------------------------------
# click front end
# --------------------------------------------------------------------------------------------


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (DataFormatError, FileNotFoundError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except NumericalError as exc:
            click.echo(f"numerical failure ({type(exc).__name__}): {exc}", err=True)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _common(fn):
    fn = click.option("--jobs", type=int, default=None, help="Worker processes (default: CPU count).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Master seed (overrides the scenario).")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("."),
                      show_default=True, help="Output directory.")(fn)
    return fn


def _setup(scenario_path, seed, jobs, out):
    scenario = load_scenario(scenario_path)
    if seed is not None:
        scenario = scenario.model_copy(update={"seed": seed})
    out.mkdir(parents=True, exist_ok=True)
    return scenario, scenario.seed, (jobs or default_jobs()), out


@click.group()
@click.version_option(__version__)
def main():
    """Benchmark single-qubit gates: DRB, GST, gauge fixing and calibration."""


@main.command()
@click.argument("scenario_file", type=click.Path(path_type=Path))
@_common
@_exit_codes
def drb(scenario_file, out, seed, jobs):
    """Simulate and fit a DRB experiment."""
    scenario, seed, jobs, out = _setup(scenario_file, seed, jobs, out)
    report = drb_pipeline(scenario, out, seed, jobs)
    click.echo(f"F_RB = {report['drb']['fidelity']:.6f} (analytic {report['analytic_fidelity']:.6f})")


@main.command("fit-drb")
@click.argument("records_file", type=click.Path(path_type=Path))
@click.option("--resamples", type=int, default=200, show_default=True)
@_common
@_exit_codes
def fit_drb(records_file, resamples, out, seed, jobs):
    """Fit externally produced DRB shot records."""
    out.mkdir(parents=True, exist_ok=True)
    report = fit_drb_pipeline(records_file, out, seed or 0, jobs or default_jobs(), resamples)
    click.echo(f"F_RB = {report['drb']['fidelity']:.6f}")


@main.command("simulate-drb")
@click.argument("scenario_file", type=click.Path(path_type=Path))
@click.option("--miscal", is_flag=True, help="Apply the scenario's injected (k, phi) miscalibration.")
@_common
@_exit_codes
def simulate_drb(scenario_file, miscal, out, seed, jobs):
    """Write simulated DRB shot records without fitting."""
    scenario, seed, _, out = _setup(scenario_file, seed, jobs, out)
    path = simulate_drb_pipeline(scenario, out, seed, miscal)
    click.echo(str(path))


@main.command()
@click.argument("scenario_file", type=click.Path(path_type=Path))
@_common
@_exit_codes
def gst(scenario_file, out, seed, jobs):
    """Simulate GST data and run linear inversion, MLE, gauge fixing and bootstrap."""
    scenario, seed, jobs, out = _setup(scenario_file, seed, jobs, out)
    report = gst_pipeline(scenario, out, seed, jobs)
    fids = report["fidelity"]["post_gauge"]
    click.echo("  ".join(f"F[{k}] = {v:.6f}" for k, v in fids.items()))


@main.command("fit-gst")
@click.argument("records_file", type=click.Path(path_type=Path))
@click.option("--scenario", "scenario_file", type=click.Path(path_type=Path), default=None,
              help="Scenario supplying the GST design and MLE options.")
@_common
@_exit_codes
def fit_gst(records_file, scenario_file, out, seed, jobs):
    """Analyze externally produced GST shot records."""
    scenario = load_scenario(scenario_file) if scenario_file is not None else None
    out.mkdir(parents=True, exist_ok=True)
    if seed is None:
        seed = scenario.seed if scenario is not None else 0
    report = fit_gst_pipeline(records_file, out, seed, jobs or default_jobs(), scenario)
    fids = report["fidelity"]["post_gauge"]
    click.echo("  ".join(f"F[{k}] = {v:.6f}" for k, v in fids.items()))


@main.command()
@click.argument("scenario_file", type=click.Path(path_type=Path))
@click.argument("records_file", type=click.Path(path_type=Path))
@_common
@_exit_codes
def calibrate(scenario_file, records_file, out, seed, jobs):
    """Score a (k, phi) calibration map against DRB records and emit corrections."""
    scenario, seed, jobs, out = _setup(scenario_file, seed, jobs, out)
    calibrate_pipeline(scenario, records_file, out, seed, jobs)


@main.command()
@click.argument("scenario_file", type=click.Path(path_type=Path))
@_common
@_exit_codes
def array(scenario_file, out, seed, jobs):
    """Benchmark every site of an array under global control."""
    scenario, seed, jobs, out = _setup(scenario_file, seed, jobs, out)
    report = array_pipeline(scenario, out, seed, jobs)
    click.echo(
        f"mean F_RB = {report['mean_fidelity']:.6f} +/- {report['mean_fidelity_ci95']:.6f} "
        f"(analytic {report['analytic_mean_fidelity']:.6f})"
    )


if __name__ == "__main__":
    main()
