"""Command-line interface.

Commands
--------
analytic   closed-form variances, limits and the quadrature cross-check
mc         Monte Carlo ensemble, summary statistics and z-score gate
simulate   one exact evolution with trajectory and noise dumps
sweep      closed forms (optionally with MC) over one swept parameter
compare    self-check battery: oracle equality, limits, MC, scaling

Configuration is a flat ``key=value`` file; any key can be overridden
with a ``--key value`` command-line flag.  Relative output paths are
resolved under ``$BERRYSIM_OUTPUT_DIR`` when that variable is set.

Exit codes: 0 success, 1 scientific check failed, 2 usage or
configuration error, 3 numerical accuracy failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analytics
from .errors import AccuracyError, BerrysimError
from .evolve import (
    IntegratorConfig,
    connection_phase_discrete,
    evolve_and_extract,
)
from .field import PrecessionSpec, adiabaticity_report, control_field
from .montecarlo import (
    coherence,
    compare_to_analytic,
    run_ensemble,
    summarize,
)
from .noise import NoiseModel, sample_path

__all__ = ["RunConfig", "config_from_file", "format_config", "main"]

_MODES = ("first_order", "full_sim")
_FORMATS = ("json", "csv")


@dataclass
class RunConfig:
    """Flat run configuration; defaults are the reference working point."""

    b0: float = 1.0
    theta0: float = math.pi / 4
    t_total: float = 100.0
    n_cycles: int = 1
    sigma12: float = 0.05
    gamma12: float = 0.1
    sigma3: float = 0.05
    gamma3: float = 0.1
    n_trials: int = 10000
    seed: int = 42
    mode: str = "first_order"
    steps_per_cycle: int = 4096
    n_jobs: int = 1
    output_path: str | None = None
    output_format: str = "json"

    def validate(self) -> None:
        self.spec()
        self.model()
        self.integrator()
        if not isinstance(self.n_trials, int) or self.n_trials < 1:
            raise ValueError(f"n_trials must be a positive integer, got {self.n_trials}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")
        if not isinstance(self.n_jobs, int) or self.n_jobs < 1:
            raise ValueError(f"n_jobs must be a positive integer, got {self.n_jobs}")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.output_format not in _FORMATS:
            raise ValueError(
                f"output_format must be one of {_FORMATS}, got {self.output_format!r}"
            )

    def spec(self) -> PrecessionSpec:
        return PrecessionSpec(
            b0=self.b0, theta0=self.theta0, t_total=self.t_total, n_cycles=self.n_cycles
        )

    def model(self) -> NoiseModel:
        return NoiseModel.from_scalars(self.sigma12, self.gamma12, self.sigma3, self.gamma3)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(steps_per_cycle=self.steps_per_cycle)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_INT_FIELDS = {"n_cycles", "n_trials", "seed", "steps_per_cycle", "n_jobs"}
_STR_FIELDS = {"mode", "output_format", "output_path"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key == "output_path":
        return raw or None
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _STR_FIELDS:
            return raw
        return float(raw)
    except ValueError:
        raise ValueError(f"invalid value for {key!r}: {raw!r}") from None


def config_from_file(path: str | Path) -> RunConfig:
    """Parse a flat key=value config file; # comments (inline too) allowed."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    config = RunConfig(**values)
    config.validate()
    return config


def format_config(config: RunConfig) -> str:
    """Render a config as the same key=value format the parser accepts."""
    lines = []
    for field in dataclasses.fields(RunConfig):
        value = getattr(config, field.name)
        lines.append(f"{field.name}={'' if value is None else value}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# output helpers


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {key: _jsonable(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(val) for val in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(val) for val in obj.tolist()]
    return obj


def _dump_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def _flatten(payload: dict, prefix: str = "") -> list:
    rows = []
    for key, value in payload.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            rows.extend(_flatten(value, name))
        elif isinstance(value, (list, tuple)):
            for i, item in enumerate(value):
                if isinstance(item, dict):
                    rows.extend(_flatten(item, f"{name}[{i}]"))
                else:
                    rows.append((f"{name}[{i}]", item))
        else:
            rows.append((name, value))
    return rows


def _dump_csv_pairs(payload: dict) -> str:
    lines = ["key,value"]
    for key, value in _flatten(payload):
        if isinstance(value, str):
            lines.append(f"{key},{value}")
        else:
            lines.append(f"{key},{_fmt(value)}")
    return "\n".join(lines) + "\n"


def _resolve_base(config: RunConfig, command: str) -> Path:
    base = Path(config.output_path) if config.output_path else Path(f"berrysim_{command}")
    out_dir = os.environ.get("BERRYSIM_OUTPUT_DIR")
    if out_dir and not base.is_absolute():
        base = Path(out_dir) / base
    if base.parent != Path("."):
        base.parent.mkdir(parents=True, exist_ok=True)
    return base


def _write_text(path: Path, text: str) -> None:
    path.write_text(text)


def _write_table(path: Path, header: list, rows: list) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def _rel_diff(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0.0 else 0.0


def _quad_nodes(spec: PrecessionSpec) -> int:
    # Resolve the fastest weight oscillation: >= 64 nodes per drive cycle.
    return max(4096, 64 * spec.n_cycles)


# --------------------------------------------------------------------------
# commands


def _analytic_payload(config: RunConfig) -> dict:
    spec = config.spec()
    model = config.model()
    var_gamma = analytics.berry_phase_variance(spec, model)
    var_delta = analytics.dynamical_phase_variance(spec, model)
    cov = analytics.phase_covariance(spec, model)
    var_alpha = analytics.total_phase_variance(spec, model)
    subterms = analytics.total_phase_subterms(spec, model)
    moments = analytics.phase_moments(spec, model)
    nodes = _quad_nodes(spec)
    w_gamma = analytics.geometric_weight(spec)
    w_alpha = w_gamma + analytics.dynamical_weight(spec)
    # rtol 1e-8 keeps the cross-check far below the 1e-6 agreement gate
    # without stalling near the roundoff floor at extreme working points
    quad_gamma = analytics.variance_by_quadrature(w_gamma, model, nodes, rtol=1e-8)
    quad_alpha = analytics.variance_by_quadrature(w_alpha, model, nodes, rtol=1e-8)
    return {
        "config": config.to_dict(),
        "omega": spec.omega,
        "variances": {
            "var_gamma": {
                "transverse": var_gamma.transverse_term,
                "longitudinal": var_gamma.longitudinal_term,
                "total": var_gamma.total,
            },
            "var_delta": {
                "transverse": var_delta.transverse_term,
                "longitudinal": var_delta.longitudinal_term,
                "total": var_delta.total,
            },
            "cov_gamma_delta": {
                "transverse": cov.transverse_term,
                "longitudinal": cov.longitudinal_term,
                "total": cov.total,
            },
            "var_alpha": {
                "transverse": var_alpha.transverse_term,
                "longitudinal": var_alpha.longitudinal_term,
                "total": var_alpha.total,
            },
        },
        "subterms": {
            "geometric": subterms.geometric.total,
            "dynamical": subterms.dynamical.total,
            "cross": subterms.cross.total,
        },
        "limits": {
            "narrowband_var_gamma": analytics.berry_phase_variance_narrowband(spec, model),
            "broadband_var_gamma": analytics.berry_phase_variance_broadband(spec, model),
        },
        "quadrature": {
            "var_gamma": {
                "value": quad_gamma.value,
                "error": quad_gamma.error,
                "nodes": quad_gamma.nodes,
                "rel_diff_closed": _rel_diff(quad_gamma.value, var_gamma.total),
            },
            "var_alpha": {
                "value": quad_alpha.value,
                "error": quad_alpha.error,
                "nodes": quad_alpha.nodes,
                "rel_diff_closed": _rel_diff(quad_alpha.value, var_alpha.total),
            },
        },
        "moments": dataclasses.asdict(moments),
        "dephasing_factor": analytics.dephasing_factor(var_alpha.total),
        "adiabaticity": adiabaticity_report(spec, model).to_dict(),
    }


def cmd_analytic(config: RunConfig, quiet: bool) -> int:
    payload = _analytic_payload(config)
    rendered = (
        _dump_json(payload) if config.output_format == "json" else _dump_csv_pairs(payload)
    )
    if config.output_path is None:
        sys.stdout.write(rendered)
    else:
        target = _resolve_base(config, "analytic")
        path = target.with_name(target.name + ".analytic." + config.output_format)
        _write_text(path, rendered)
        _say(quiet, f"analytic: wrote {path}")
    return 0


def _records_table(records) -> tuple[list, list]:
    header = ["trial_index", "gamma_fo", "delta_fo", "alpha_fo", "gamma_sim", "leakage"]
    rows = [
        [r.trial_index, r.gamma_fo, r.delta_fo, r.alpha_fo, r.gamma_sim, r.leakage]
        for r in records
    ]
    return header, rows


def cmd_mc(config: RunConfig, quiet: bool, tamper_variance_scale: float | None) -> int:
    spec = config.spec()
    model = config.model()
    records = run_ensemble(
        spec,
        model,
        config.n_trials,
        config.seed,
        mode=config.mode,
        config=config.integrator(),
        n_jobs=config.n_jobs,
    )
    stats = summarize(records)
    moments = analytics.phase_moments(spec, model)
    if tamper_variance_scale is not None:
        # Deliberately corrupted targets; used to exercise the failure path.
        moments = dataclasses.replace(
            moments,
            var_gamma=moments.var_gamma * tamper_variance_scale,
            var_delta=moments.var_delta * tamper_variance_scale,
            var_alpha=moments.var_alpha * tamper_variance_scale,
            cov_gamma_delta=moments.cov_gamma_delta * tamper_variance_scale,
        )
    report = compare_to_analytic(stats, moments)
    coh = coherence(records, moments.var_alpha) if len(records) >= 100 else None
    passed = report.passed and (coh is None or abs(coh.z_score) <= report.threshold)

    base = _resolve_base(config, "mc")
    records_path = base.with_name(base.name + ".records.csv")
    summary_path = base.with_name(base.name + ".summary.json")
    header, rows = _records_table(records)
    _write_table(records_path, header, rows)
    payload = {
        "config": config.to_dict(),
        "analytic": dataclasses.asdict(moments),
        "empirical": {
            "n_trials": stats.n_trials,
            "mean": stats.mean,
            "variance": stats.variance,
            "sem_mean": stats.sem_mean,
            "sem_variance": stats.sem_variance,
            "skewness": stats.skewness,
            "excess_kurtosis": stats.excess_kurtosis,
            "se_skewness": stats.se_skewness,
            "se_kurtosis": stats.se_kurtosis,
            "cov_gamma_delta": stats.cov_gamma_delta,
            "se_cov_gamma_delta": stats.se_cov_gamma_delta,
        },
        "z_scores": report.z_scores,
        "z_threshold": report.threshold,
        "coherence": None
        if coh is None
        else {
            "measured": coh.measured,
            "predicted": coh.predicted,
            "se": coh.se,
            "z_score": coh.z_score,
        },
        "adiabaticity": adiabaticity_report(spec, model).to_dict(),
        "pass": passed,
    }
    _write_text(summary_path, _dump_json(payload))
    max_z = max(abs(z) for z in report.z_scores.values())
    _say(
        quiet,
        f"mc: n_trials={stats.n_trials} max|z|={max_z:.3f} "
        f"pass={str(passed).lower()} wrote {records_path} {summary_path}",
    )
    return 0 if passed else 1


def cmd_simulate(config: RunConfig, quiet: bool, branch: str) -> int:
    spec = config.spec()
    model = config.model()
    integrator = config.integrator()
    n_steps = integrator.steps_per_cycle * spec.n_cycles
    dt = spec.t_total / n_steps
    path = sample_path(model, n_steps, dt, config.seed)
    extraction, trace = evolve_and_extract(
        spec, path, integrator, branch=branch, return_trace=True
    )
    chain_phase = connection_phase_discrete(spec, path, branch=branch)
    s0 = math.sin(spec.theta0)
    noncyclic = (
        analytics.noncyclic_connection_term(spec, path) if s0 >= 1e-12 else None
    )

    base = _resolve_base(config, "simulate")
    trajectory_path = base.with_name(base.name + ".trajectory.csv")
    noise_path = base.with_name(base.name + ".noise.csv")
    summary_path = base.with_name(base.name + ".summary.json")

    b_control = control_field(spec, np.minimum(trace.times, spec.t_total))
    header = [
        "t",
        "b_control_x", "b_control_y", "b_control_z",
        "k_x", "k_y", "k_z",
        "re_amp_up", "im_amp_up", "re_amp_down", "im_amp_down",
        "energy", "total_phase", "dynamical_phase",
    ]
    rows = []
    for i in range(trace.times.size):
        rows.append(
            [
                trace.times[i],
                b_control[i, 0], b_control[i, 1], b_control[i, 2],
                path.samples[i, 0], path.samples[i, 1], path.samples[i, 2],
                trace.amp_up[i].real, trace.amp_up[i].imag,
                trace.amp_down[i].real, trace.amp_down[i].imag,
                trace.energy[i], trace.total_phase[i], trace.dynamical_phase[i],
            ]
        )
    _write_table(trajectory_path, header, rows)
    _write_table(
        noise_path,
        ["t", "k_1", "k_2", "k_3"],
        [[path.times[i], *path.samples[i]] for i in range(path.times.size)],
    )
    payload = {
        "config": config.to_dict(),
        "branch": branch,
        "extraction": {
            "total_phase": extraction.total_phase,
            "dynamical_phase": extraction.dynamical_phase,
            "geometric_phase": extraction.geometric_phase,
            "geometric_phase_raw": extraction.geometric_phase_raw,
            "leakage": extraction.leakage,
            "field_modulus_integral": extraction.field_modulus_integral,
            "mean_energy_integral": extraction.mean_energy_integral,
            "winding": extraction.winding,
            "degenerate_steps": extraction.degenerate_steps,
            "non_adiabatic": extraction.non_adiabatic,
        },
        "connection_chain_phase": chain_phase,
        "noncyclic_connection_term": noncyclic,
        "noiseless_berry_phase": analytics.noiseless_berry_phase(spec.theta0),
        "adiabaticity": adiabaticity_report(spec, model).to_dict(),
    }
    _write_text(summary_path, _dump_json(payload))
    _say(
        quiet,
        f"simulate: geometric={extraction.geometric_phase:.6f} "
        f"dynamical={extraction.dynamical_phase:.6f} leakage={extraction.leakage:.3e} "
        f"winding={extraction.winding} wrote {trajectory_path}",
    )
    if extraction.non_adiabatic:
        _say(quiet, f"warning: leakage {extraction.leakage:.3e} exceeds "
                    f"{integrator.leakage_warn_threshold:.1e}; evolution is not adiabatic")
    return 0


_SWEEPABLE = ("t_total", "gamma12", "gamma3", "theta0")


def cmd_sweep(
    config: RunConfig,
    quiet: bool,
    param: str,
    raw_values: str,
    fixed_omega: bool,
    with_mc: bool,
) -> int:
    if param not in _SWEEPABLE:
        raise ValueError(f"unsupported sweep parameter {param!r}")
    try:
        values = [float(v) for v in raw_values.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"invalid sweep values {raw_values!r}") from None
    if not values:
        raise ValueError("sweep needs at least one value")

    rows = []
    for value in values:
        overrides = {param: value}
        if fixed_omega and param == "t_total":
            exact = config.n_cycles * value / config.t_total
            n_cycles = round(exact)
            if abs(exact - n_cycles) > 1e-9 or n_cycles < 1:
                raise ValueError(
                    f"fixed-omega sweep requires t_total {value} to keep n_cycles integral"
                )
            overrides["n_cycles"] = n_cycles
        point = dataclasses.replace(config, **overrides)
        point.validate()
        spec = point.spec()
        model = point.model()
        row = {
            param: value,
            "n_cycles": spec.n_cycles,
            "omega": spec.omega,
            "var_gamma_transverse": analytics.berry_phase_variance(spec, model).transverse_term,
            "var_gamma_longitudinal": analytics.berry_phase_variance(spec, model).longitudinal_term,
            "var_gamma": analytics.berry_phase_variance(spec, model).total,
            "var_delta": analytics.dynamical_phase_variance(spec, model).total,
            "cov_gamma_delta": analytics.phase_covariance(spec, model).total,
            "var_alpha": analytics.total_phase_variance(spec, model).total,
            "narrowband_var_gamma": analytics.berry_phase_variance_narrowband(spec, model),
            "broadband_var_gamma": analytics.berry_phase_variance_broadband(spec, model),
            "var_gamma_quadrature": analytics.variance_by_quadrature(
                analytics.geometric_weight(spec), model, _quad_nodes(spec), rtol=1e-7
            ).value,
        }
        if with_mc:
            stats = summarize(
                run_ensemble(
                    spec,
                    model,
                    point.n_trials,
                    point.seed,
                    mode="first_order",
                    config=point.integrator(),
                    n_jobs=point.n_jobs,
                )
            )
            row["mc_var_gamma"] = stats.variance["gamma_fo"]
            row["mc_var_delta"] = stats.variance["delta_fo"]
            row["mc_var_alpha"] = stats.variance["alpha_fo"]
            row["mc_sem_var_gamma"] = stats.sem_variance["gamma_fo"]
        rows.append(row)

    slopes = {}
    if param == "t_total" and len(values) >= 2:
        for key in ("var_gamma", "var_delta"):
            series = np.array([row[key] for row in rows])
            if np.all(series > 0.0):
                slopes[f"loglog_slope_{key}"] = float(
                    np.polyfit(np.log(values), np.log(series), 1)[0]
                )

    base = _resolve_base(config, "sweep")
    table_path = base.with_name(base.name + ".sweep.csv")
    summary_path = base.with_name(base.name + ".summary.json")
    header = list(rows[0].keys())
    _write_table(table_path, header, [[row[k] for k in header] for row in rows])
    payload = {
        "config": config.to_dict(),
        "param": param,
        "values": values,
        "fixed_omega": fixed_omega,
        "rows": rows,
        "slopes": slopes,
    }
    _write_text(summary_path, _dump_json(payload))
    slope_note = " ".join(f"{k}={v:.4f}" for k, v in slopes.items())
    _say(quiet, f"sweep: {len(rows)} points over {param} {slope_note} wrote {table_path}")
    return 0


def _battery(config: RunConfig) -> list:
    """The compare battery: (name, passed, detail) triples."""
    checks = []
    spec = config.spec()
    model = config.model()
    moments = analytics.phase_moments(spec, model)
    nodes = _quad_nodes(spec)

    quad_gamma = analytics.variance_by_quadrature(
        analytics.geometric_weight(spec), model, nodes
    )
    rel = _rel_diff(quad_gamma.value, moments.var_gamma)
    checks.append(
        ("oracle_var_gamma", rel <= 1e-6,
         f"closed={moments.var_gamma:.9e} quadrature={quad_gamma.value:.9e} rel={rel:.2e}")
    )
    w_alpha = analytics.geometric_weight(spec) + analytics.dynamical_weight(spec)
    quad_alpha = analytics.variance_by_quadrature(w_alpha, model, nodes)
    rel = _rel_diff(quad_alpha.value, moments.var_alpha)
    checks.append(
        ("oracle_var_alpha", rel <= 1e-6,
         f"closed={moments.var_alpha:.9e} quadrature={quad_alpha.value:.9e} rel={rel:.2e}")
    )
    quad_cov = analytics.covariance_by_quadrature(
        analytics.geometric_weight(spec), analytics.dynamical_weight(spec), model, nodes
    )
    rel = _rel_diff(quad_cov.value, moments.cov_gamma_delta)
    checks.append(
        ("oracle_cov", rel <= 1e-6,
         f"closed={moments.cov_gamma_delta:.9e} quadrature={quad_cov.value:.9e} rel={rel:.2e}")
    )

    # Limiting forms, each evaluated in its own regime at this geometry.
    t_total = config.t_total
    slow = NoiseModel.from_scalars(
        config.sigma12, 0.01 / t_total, config.sigma3, 0.01 / t_total
    )
    spec_1 = dataclasses.replace(config, n_cycles=1).spec()
    nb = analytics.berry_phase_variance_narrowband(spec_1, slow)
    closed = analytics.berry_phase_variance(spec_1, slow).total
    rel = _rel_diff(nb, closed)
    checks.append(
        ("narrowband_limit", rel <= 0.05,
         f"limit={nb:.6e} closed={closed:.6e} rel={rel:.2e}")
    )
    fast = NoiseModel.from_scalars(
        config.sigma12, 1000.0 / t_total, config.sigma3, 1000.0 / t_total
    )
    bb = analytics.berry_phase_variance_broadband(spec_1, fast)
    closed = analytics.berry_phase_variance(spec_1, fast).total
    rel = _rel_diff(bb, closed)
    checks.append(
        ("broadband_limit", rel <= 0.05,
         f"limit={bb:.6e} closed={closed:.6e} rel={rel:.2e}")
    )

    records = run_ensemble(
        spec,
        model,
        config.n_trials,
        config.seed,
        mode="first_order",
        config=config.integrator(),
        n_jobs=config.n_jobs,
    )
    stats = summarize(records)
    report = compare_to_analytic(stats, moments)
    max_z = max(abs(z) for z in report.z_scores.values())
    checks.append(
        ("mc_moments", report.passed, f"n={stats.n_trials} max|z|={max_z:.3f}")
    )
    if len(records) >= 100:
        coh = coherence(records, moments.var_alpha)
        checks.append(
            ("mc_coherence", abs(coh.z_score) <= 3.0,
             f"measured={coh.measured:.6e} predicted={coh.predicted:.6e} z={coh.z_score:.3f}")
        )
    cov_ok = abs(stats.cov_gamma_delta - moments.cov_gamma_delta) <= 3.0 * stats.se_cov_gamma_delta
    if moments.cov_gamma_delta != 0.0:
        cov_ok = cov_ok and abs(stats.cov_gamma_delta) > 3.0 * stats.se_cov_gamma_delta
    checks.append(
        ("mc_covariance", cov_ok,
         f"empirical={stats.cov_gamma_delta:.6e} closed={moments.cov_gamma_delta:.6e} "
         f"se={stats.se_cov_gamma_delta:.2e}")
    )

    if model.transverse.sigma > 0.0 or model.longitudinal.sigma > 0.0:
        # log-log slopes of the closed forms deep in the broadband regime
        base_t = max(t_total, 100.0 / model.transverse.gamma, 100.0 / model.longitudinal.gamma)
        t_values = [base_t, 2.0 * base_t, 4.0 * base_t, 8.0 * base_t]
        vg = []
        vd = []
        for t_value in t_values:
            spec_t = PrecessionSpec(config.b0, config.theta0, t_value, 1)
            vg.append(analytics.berry_phase_variance(spec_t, model).total)
            vd.append(analytics.dynamical_phase_variance(spec_t, model).total)
        log_t = np.log(t_values)
        detail = []
        ok = True
        if all(v > 0.0 for v in vg):
            slope = float(np.polyfit(log_t, np.log(vg), 1)[0])
            ok = ok and abs(slope + 1.0) <= 0.05
            detail.append(f"slope_var_gamma={slope:.4f} (target -1)")
        if all(v > 0.0 for v in vd):
            slope = float(np.polyfit(log_t, np.log(vd), 1)[0])
            ok = ok and abs(slope - 1.0) <= 0.05
            detail.append(f"slope_var_delta={slope:.4f} (target +1)")
        checks.append(("broadband_scaling", ok, " ".join(detail) or "no noise"))

    sim_records = run_ensemble(
        spec, model, 8, config.seed, mode="full_sim", config=config.integrator()
    )
    baseline = evolve_and_extract(spec, None, config.integrator())
    residuals = [
        abs(r.gamma_sim - baseline.geometric_phase - r.gamma_fo) for r in sim_records
    ]
    median_residual = float(np.median(residuals))
    checks.append(
        ("first_order_vs_sim", median_residual <= 0.1,
         f"median|gamma_sim - gamma_noiseless - gamma_fo|={median_residual:.3e} rad")
    )

    report_ad = adiabaticity_report(spec, model)
    worst = max(report_ad.ratios, key=lambda k: report_ad.ratios[k] / report_ad.thresholds[k])
    checks.append(
        ("adiabaticity", report_ad.passed,
         f"worst {worst}={report_ad.ratios[worst]:.3g} "
         f"(threshold {report_ad.thresholds[worst]:.3g})")
    )
    return checks


def cmd_compare(config: RunConfig, quiet: bool) -> int:
    checks = _battery(config)
    for name, ok, detail in checks:
        _say(quiet, f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    passed = all(ok for _, ok, _ in checks)
    if config.output_path is not None:
        base = _resolve_base(config, "compare")
        path = base.with_name(base.name + ".compare.json")
        _write_text(
            path,
            _dump_json(
                {
                    "config": config.to_dict(),
                    "checks": [
                        {"name": n, "passed": ok, "detail": d} for n, ok, d in checks
                    ],
                    "pass": passed,
                }
            ),
        )
        _say(quiet, f"compare: wrote {path}")
    _say(quiet, f"compare: {'all checks passed' if passed else 'CHECKS FAILED'}")
    return 0 if passed else 1


# --------------------------------------------------------------------------
# argument parsing and dispatch


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, metavar="FILE",
                        help="key=value config file")
    common.add_argument("--quiet", action="store_true", help="suppress progress lines")
    common.add_argument("--tamper-variance-scale", type=float, default=None,
                        help=argparse.SUPPRESS)
    for field in dataclasses.fields(RunConfig):
        flag = "--" + field.name.replace("_", "-")
        if field.name == "output_path":
            common.add_argument(flag, "-o", dest=field.name, default=None,
                                help="output file base (suffixes are appended)")
        elif field.name in _INT_FIELDS:
            common.add_argument(flag, dest=field.name, type=int, default=None)
        elif field.name in _STR_FIELDS:
            common.add_argument(flag, dest=field.name, default=None)
        else:
            common.add_argument(flag, dest=field.name, type=float, default=None)

    parser = argparse.ArgumentParser(
        prog="berrysim",
        description="Geometric-phase statistics of a spin-1/2 under field noise",
    )
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("analytic", parents=[common],
                   help="closed-form variances with the quadrature cross-check")
    sub.add_parser("mc", parents=[common],
                   help="Monte Carlo ensemble and z-score comparison")
    sim = sub.add_parser("simulate", parents=[common],
                         help="one exact evolution with trajectory dump")
    sim.add_argument("--branch", choices=("up", "down"), default="up")
    sweep = sub.add_parser("sweep", parents=[common],
                           help="closed forms over one swept parameter")
    sweep.add_argument("--param", required=True, choices=_SWEEPABLE)
    sweep.add_argument("--values", required=True,
                       help="comma-separated parameter values")
    sweep.add_argument("--fixed-omega", action="store_true",
                       help="rescale n_cycles so omega stays constant (t_total sweeps)")
    sweep.add_argument("--with-mc", action="store_true",
                       help="attach Monte Carlo variances per point")
    sub.add_parser("compare", parents=[common], help="self-check battery")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = config_from_file(args.config) if args.config else RunConfig()
    for field in dataclasses.fields(RunConfig):
        override = getattr(args, field.name, None)
        if override is not None:
            setattr(config, field.name, override)
    if config.output_path == "":
        config.output_path = None
    config.validate()
    return config


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code in (0, None):
            return 0
        return 2
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        config = _load_config(args)
        if args.command == "analytic":
            return cmd_analytic(config, args.quiet)
        if args.command == "mc":
            return cmd_mc(config, args.quiet, args.tamper_variance_scale)
        if args.command == "simulate":
            return cmd_simulate(config, args.quiet, args.branch)
        if args.command == "sweep":
            return cmd_sweep(
                config, args.quiet, args.param, args.values,
                args.fixed_omega, args.with_mc,
            )
        if args.command == "compare":
            return cmd_compare(config, args.quiet)
        parser.print_usage(sys.stderr)
        return 2
    except AccuracyError as exc:
        print(f"accuracy error: {exc}", file=sys.stderr)
        return 3
    except BerrysimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
