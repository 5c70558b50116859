"""Experiment pipelines behind the command-line interface.

Each pipeline takes one :class:`~gsdde.config.ExperimentConfig` and produces
a JSON report plus zero or more moment-curve CSV files:

``simulate``
    Worst-case p-th moment curves of the delay scheme and the auxiliary
    delay-free scheme under a shared noise family.
``fit``
    The same curves plus fitted practical exponential envelopes.
``certify``
    One stability transfer from the envelope given in the config.
``chain``
    The full cycle of four transfers from the given envelope.
``compare``
    Fine-step references and schemes for both equations, coupled pathwise;
    envelope fits for all four; a transfer chain started from the fitted
    envelope; and a dominance check of every derived envelope against the
    matching empirical curve.
``convergence``
    Terminal scheme-versus-reference gaps across a list of steps-per-delay
    values, with observed and predicted decay orders.

Reports are reproducible for a fixed config and seed, up to the
``generated_at`` timestamp.
"""

from __future__ import annotations

import dataclasses
import json
import math
import platform
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._version import __version__
from .certify import (
    GLOSSARY,
    StabilityParams,
    transfer_chain,
    transfer_emsde_to_emsdde,
    transfer_emsdde_to_sdde,
    transfer_sde_to_emsde,
    transfer_sdde_to_sde,
)
from .config import ConfigError, ExperimentConfig
from .detect import FitResult, fit_practical_stability, verify_envelope
from .model import DelayGrid, segment_norm
from .sublinear import gap_curve, moment_curve, simulate_ensemble, write_curve_csv

__all__ = ["RunResult", "run", "write_outputs"]


@dataclass
class RunResult:
    """A finished pipeline: the report, its curves, and an overall status.

    ``status`` is ``"ok"`` or ``"inapplicable"``; the latter marks a run
    whose certificate (or chain) failed its applicability condition, which
    is an honest outcome rather than an error.
    """

    report: dict
    curves: dict
    status: str


@dataclass
class _Setup:
    config: ExperimentConfig
    system: object
    gp: object
    grid: DelayGrid
    xi: object
    p: float
    seg_basis: float
    point_basis: float
    fit_config: object


def _point_moment(xi, p: float) -> float:
    v = xi.at(0.0)
    return float(np.dot(v, v) ** (p / 2.0))


def _segment_ratio(setup: _Setup) -> float:
    if setup.point_basis <= 0.0:
        raise ConfigError(
            "transfers leaving the delay equation need a nonzero initial "
            "point: the envelope bases differ by the ratio of the segment "
            "sup-moment to the initial-point moment"
        )
    return setup.seg_basis / setup.point_basis


def _transfer_kwargs(setup: _Setup) -> dict:
    return {
        "p": setup.p,
        "lipschitz": setup.system.lipschitz,
        "growth": setup.system.growth,
        "sigma_hi": setup.gp.sigma_hi,
        "delta_conf": setup.config.confidence_delta,
    }


def _single_transfer(start: StabilityParams, setup: _Setup):
    kwargs = _transfer_kwargs(setup)
    if start.kind == "SDDE":
        return transfer_sdde_to_sde(
            start,
            tau=setup.grid.tau,
            segment_ratio=_segment_ratio(setup),
            **kwargs,
        )
    if start.kind == "SDE":
        return transfer_sde_to_emsde(start, step=setup.grid.delta, **kwargs)
    if start.kind == "EM-SDE":
        return transfer_emsde_to_emsdde(start, tau=setup.grid.tau, **kwargs)
    return transfer_emsdde_to_sdde(
        start, tau=setup.grid.tau, step=setup.grid.delta, **kwargs
    )


def _params_json(params: StabilityParams) -> dict:
    return {
        "prefactor": params.prefactor,
        "rate": params.rate,
        "offset": params.offset,
        "kind": params.kind,
        "basis": params.basis,
    }


def _fit_json(fit: FitResult) -> dict:
    return {
        "params": None if fit.params is None else _params_json(fit.params),
        "decaying": fit.decaying,
        "verdict": fit.verdict,
        "r_squared": fit.r_squared,
        "raw_prefactor": fit.raw_prefactor,
        "raw_rate": fit.raw_rate,
        "raw_offset": fit.raw_offset,
        "prefactor_inflation": fit.prefactor_inflation,
        "offset_inflation": fit.offset_inflation,
        "basis_moment": fit.basis_moment,
        "kind": fit.kind,
    }


def _ensemble_and_curve(setup: _Setup, *, delay: bool, reference: bool, label: str):
    cfg = setup.config
    init = setup.xi if delay else setup.xi.at(0.0)
    ens = simulate_ensemble(
        setup.system,
        init,
        setup.grid,
        setup.gp,
        scenario_count=cfg.scenario_count,
        paths=cfg.paths_per_scenario,
        seed=cfg.master_seed,
        reference=reference,
        refine_factor=cfg.refine_factor,
        explosion_cap=cfg.explosion_cap,
        workers=cfg.workers,
    )
    return ens, moment_curve(ens, setup.p, label=label)


def _require_start(setup: _Setup) -> StabilityParams:
    start = setup.config.start_params()
    if start is None:
        raise ConfigError(
            f"pipeline '{setup.config.pipeline}' needs a starting envelope: "
            "set start_prefactor_m (>= 1), start_rate_lambda (> 0), "
            "start_offset_d (>= 0), and start_kind"
        )
    return start


# -- pipelines ---------------------------------------------------------------


def _run_simulate(setup: _Setup):
    ens_x, curve_x = _ensemble_and_curve(
        setup, delay=True, reference=False, label="emsdde_moment"
    )
    _, curve_y = _ensemble_and_curve(
        setup, delay=False, reference=False, label="emsde_moment"
    )
    curves = {"emsdde_moment": curve_x, "emsde_moment": curve_y}
    results = {
        "terminal": {
            "emsdde": curve_x.terminal(),
            "emsde": curve_y.terminal(),
        },
        "terminal_argmax_scenario": {
            "emsdde": int(curve_x.argmax_scenario[-1]),
            "emsde": int(curve_y.argmax_scenario[-1]),
        },
        "scenario_kinds": list(ens_x.scenario_kinds),
    }
    return results, curves, "ok"


def _run_fit(setup: _Setup):
    results, curves, _ = _run_simulate(setup)
    fit_x = fit_practical_stability(
        curves["emsdde_moment"], setup.seg_basis, "EM-SDDE", setup.fit_config
    )
    fit_y = fit_practical_stability(
        curves["emsde_moment"], setup.point_basis, "EM-SDE", setup.fit_config
    )
    checks = {}
    for name, fit, curve, basis in (
        ("EM-SDDE", fit_x, curves["emsdde_moment"], setup.seg_basis),
        ("EM-SDE", fit_y, curves["emsde_moment"], setup.point_basis),
    ):
        if fit.params is not None:
            holds, slack = verify_envelope(curve, fit.params, basis)
            checks[name] = {"holds": holds, "worst_slack": slack}
    results["fits"] = {"EM-SDDE": _fit_json(fit_x), "EM-SDE": _fit_json(fit_y)}
    results["envelope_checks"] = checks
    return results, curves, "ok"


def _run_certify(setup: _Setup):
    start = _require_start(setup)
    report = _single_transfer(start, setup)
    status = "ok" if report.applicable else "inapplicable"
    return {"certificate": report.to_json_dict()}, {}, status


def _run_chain(setup: _Setup):
    start = _require_start(setup)
    reports = transfer_chain(
        start,
        tau=setup.grid.tau,
        step=setup.grid.delta,
        segment_ratio=_segment_ratio(setup),
        **_transfer_kwargs(setup),
    )
    completed = len(reports) == 4 and all(r.applicable for r in reports)
    results = {
        "chain": [r.to_json_dict() for r in reports],
        "chain_completed": completed,
    }
    return results, {}, "ok" if completed else "inapplicable"


def _run_compare(setup: _Setup):
    ens_x_ref, curve_x_ref = _ensemble_and_curve(
        setup, delay=True, reference=True, label="sdde_moment"
    )
    ens_x, curve_x = _ensemble_and_curve(
        setup, delay=True, reference=False, label="emsdde_moment"
    )
    ens_y_ref, curve_y_ref = _ensemble_and_curve(
        setup, delay=False, reference=True, label="sde_moment"
    )
    ens_y, curve_y = _ensemble_and_curve(
        setup, delay=False, reference=False, label="emsde_moment"
    )
    curves = {
        "sdde_moment": curve_x_ref,
        "emsdde_moment": curve_x,
        "sde_moment": curve_y_ref,
        "emsde_moment": curve_y,
        "emsdde_gap": gap_curve(ens_x_ref, ens_x, setup.p, label="emsdde_gap"),
        "emsde_gap": gap_curve(ens_y_ref, ens_y, setup.p, label="emsde_gap"),
    }

    curve_for = {
        "SDDE": curve_x_ref,
        "EM-SDDE": curve_x,
        "SDE": curve_y_ref,
        "EM-SDE": curve_y,
    }
    basis_for = {
        "SDDE": setup.seg_basis,
        "EM-SDDE": setup.seg_basis,
        "SDE": setup.point_basis,
        "EM-SDE": setup.point_basis,
    }
    fits = {
        kind: fit_practical_stability(
            curve_for[kind], basis_for[kind], kind, setup.fit_config
        )
        for kind in curve_for
    }

    results = {
        "fits": {kind: _fit_json(fit) for kind, fit in fits.items()},
        "terminal_gaps": {
            "emsdde": curves["emsdde_gap"].terminal(),
            "emsde": curves["emsde_gap"].terminal(),
        },
    }

    start_kind = setup.config.start_kind
    start_fit = fits[start_kind]
    if start_fit.params is None:
        results["chain"] = []
        results["chain_completed"] = False
        results["chain_skipped_reason"] = (
            f"no decaying envelope could be fitted for {start_kind}; "
            "nothing to transfer"
        )
        return results, curves, "inapplicable"

    reports = transfer_chain(
        start_fit.params,
        tau=setup.grid.tau,
        step=setup.grid.delta,
        segment_ratio=_segment_ratio(setup),
        **_transfer_kwargs(setup),
    )
    completed = len(reports) == 4 and all(r.applicable for r in reports)
    verification = []
    for rep in reports:
        if rep.derived is None:
            continue
        kind = rep.derived.kind
        holds, slack = verify_envelope(
            curve_for[kind], rep.derived, basis_for[kind]
        )
        verification.append(
            {"kind": kind, "holds": holds, "worst_slack": slack}
        )
    results["chain"] = [r.to_json_dict() for r in reports]
    results["chain_completed"] = completed
    results["verification"] = verification
    return results, curves, "ok" if completed else "inapplicable"


def _run_convergence(setup: _Setup):
    cfg = setup.config
    m_list = sorted(set(cfg.convergence_m_list))
    curves = {}
    deltas, gaps_sdde, gaps_sde = [], [], []
    for m in m_list:
        sub = dataclasses.replace(cfg, steps_per_delay=m)
        grid_m = sub.build_grid()
        setup_m = dataclasses.replace(
            setup, config=sub, grid=grid_m, xi=sub.build_initial()
        )
        ens_x_ref, _ = _ensemble_and_curve(
            setup_m, delay=True, reference=True, label="sdde_moment"
        )
        ens_x, _ = _ensemble_and_curve(
            setup_m, delay=True, reference=False, label="emsdde_moment"
        )
        ens_y_ref, _ = _ensemble_and_curve(
            setup_m, delay=False, reference=True, label="sde_moment"
        )
        ens_y, _ = _ensemble_and_curve(
            setup_m, delay=False, reference=False, label="emsde_moment"
        )
        gap_x = gap_curve(ens_x_ref, ens_x, setup.p, label=f"sdde_gap_m{m}")
        gap_y = gap_curve(ens_y_ref, ens_y, setup.p, label=f"sde_gap_m{m}")
        curves[f"sdde_gap_m{m}"] = gap_x
        curves[f"sde_gap_m{m}"] = gap_y
        deltas.append(grid_m.delta)
        gaps_sdde.append(gap_x.terminal())
        gaps_sde.append(gap_y.terminal())

    def slope(gaps):
        if len(gaps) < 2 or any(g <= 0 for g in gaps):
            return None
        return float(np.polyfit(np.log(deltas), np.log(gaps), 1)[0])

    results = {
        "m_list": m_list,
        "delta_list": deltas,
        "terminal_gap_sdde": gaps_sdde,
        "terminal_gap_sde": gaps_sde,
        "observed_order_sdde": slope(gaps_sdde),
        "observed_order_sde": slope(gaps_sde),
        "predicted_order": setup.p / 2.0,
    }
    return results, curves, "ok"


_PIPELINE_RUNNERS = {
    "simulate": _run_simulate,
    "fit": _run_fit,
    "certify": _run_certify,
    "chain": _run_chain,
    "compare": _run_compare,
    "convergence": _run_convergence,
}


def run(config: ExperimentConfig) -> RunResult:
    """Execute the configured pipeline and assemble its report."""
    config.validate()
    system = config.build_system()
    gp = config.build_gparams()
    grid = config.build_grid()
    xi = config.build_initial()
    p = config.moment_order_p
    setup = _Setup(
        config=config,
        system=system,
        gp=gp,
        grid=grid,
        xi=xi,
        p=p,
        seg_basis=segment_norm(xi, p),
        point_basis=_point_moment(xi, p),
        fit_config=config.build_fit_config(),
    )
    results, curves, status = _PIPELINE_RUNNERS[config.pipeline](setup)
    report = {
        "tool": "gsdde",
        "version": __version__,
        "pipeline": config.pipeline,
        "status": status,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "seed": config.master_seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "glossary": GLOSSARY,
        "grid": {
            "tau": grid.tau,
            "steps_per_delay": grid.m,
            "step": grid.delta,
            "horizon": grid.horizon,
            "n_steps": grid.n_steps,
        },
        "system": {
            "dimension": system.dimension,
            "lipschitz": system.lipschitz,
            "growth": system.growth,
            "sigma_lo": gp.sigma_lo,
            "sigma_hi": gp.sigma_hi,
            "degenerate_volatility": gp.degenerate,
        },
        "basis": {
            "segment": setup.seg_basis,
            "initial_point": setup.point_basis,
            "moment_order_p": p,
        },
        "config": config.to_json_dict(),
        "results": results,
    }
    return RunResult(report=report, curves=curves, status=status)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {key: _jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_outputs(result: RunResult, out_dir) -> Path:
    """Write report.json and curve_<name>.csv files; return the report path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve_files = {}
    for name, curve in result.curves.items():
        filename = f"curve_{name}.csv"
        write_curve_csv(curve, out / filename)
        curve_files[name] = filename
    report = dict(result.report)
    report["curve_files"] = curve_files
    path = out / "report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, indent=2)
        fh.write("\n")
    return path
