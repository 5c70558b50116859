"""Command-line interface.

Usage::

    gsdde <pipeline> [--config PATH] [--seed N] [--out DIR] [--workers N]

where ``<pipeline>`` is one of simulate, fit, certify, chain, compare, or
convergence.  Flags override ``GSDDE_``-prefixed environment variables,
which in turn override values from the config file.

Exit codes: 0 success; 2 configuration problem; 3 integration failure
(explosion or non-finite state); 4 honest but inapplicable certificate.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from ._version import __version__
from .config import (
    ConfigError,
    ENV_PREFIX,
    ExperimentConfig,
    PIPELINES,
    env_overrides,
)
from .harness import RunResult, run, write_outputs
from .integrators import IntegrationError

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_INAPPLICABLE = 4

_HELP = {
    "simulate": "estimate worst-case moment curves for both schemes",
    "fit": "simulate and fit practical exponential envelopes",
    "certify": "run one stability transfer from a given envelope",
    "chain": "run the full four-step transfer cycle",
    "compare": "cross-check fitted envelopes against transferred certificates",
    "convergence": "measure scheme-versus-reference gaps across step sizes",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsdde",
        description=(
            "Worst-case moment simulation and practical exponential "
            "stability certificates for stochastic delay systems under "
            "volatility uncertainty."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(
        dest="pipeline", required=True, metavar="{" + ",".join(PIPELINES) + "}"
    )
    for name in PIPELINES:
        cmd = sub.add_parser(name, help=_HELP[name])
        cmd.add_argument(
            "--config",
            metavar="PATH",
            help=f"TOML config file (env {ENV_PREFIX}CONFIG)",
        )
        cmd.add_argument(
            "--seed",
            type=int,
            metavar="N",
            help=f"master seed (env {ENV_PREFIX}SEED)",
        )
        cmd.add_argument(
            "--out",
            metavar="DIR",
            help=f"output directory (env {ENV_PREFIX}OUT)",
        )
        cmd.add_argument(
            "--workers",
            type=int,
            metavar="N",
            help=f"scenario worker threads, 0 = serial (env {ENV_PREFIX}WORKERS)",
        )
    return parser


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    env = env_overrides()
    path = args.config or env.get("config")
    cfg = ExperimentConfig.from_toml(path) if path else ExperimentConfig()
    updates = {"pipeline": args.pipeline}
    for field, flag in (
        ("master_seed", args.seed),
        ("out_dir", args.out),
        ("workers", args.workers),
    ):
        if flag is not None:
            updates[field] = flag
        elif field in env:
            updates[field] = env[field]
    cfg = dataclasses.replace(cfg, **updates)
    cfg.validate()
    return cfg


def _summary(result: RunResult) -> list:
    res = result.report["results"]
    pipeline = result.report["pipeline"]
    lines = []
    if pipeline in ("simulate", "fit"):
        term = res["terminal"]
        lines.append(
            "terminal worst-case moment: "
            f"delay scheme {term['emsdde']:.6g}, "
            f"delay-free scheme {term['emsde']:.6g}"
        )
    if pipeline == "fit":
        for kind, fit in res["fits"].items():
            lines.append(f"{kind}: {fit['verdict']}")
    if pipeline == "certify":
        cert = res["certificate"]
        if cert["applicable"]:
            lines.append(
                f"{cert['direction']}: applicable, "
                f"threshold {cert['threshold']:.6g}, rate {cert['rate']:.6g}"
            )
        else:
            lines.append(f"{cert['direction']}: inapplicable - {cert['reason']}")
    if pipeline in ("chain", "compare") and "chain" in res:
        for cert in res["chain"]:
            state = (
                "applicable" if cert["applicable"]
                else f"inapplicable - {cert['reason']}"
            )
            lines.append(f"{cert['direction']}: {state}")
        if res.get("chain_skipped_reason"):
            lines.append(res["chain_skipped_reason"])
    if pipeline == "compare" and res.get("verification"):
        for entry in res["verification"]:
            state = "holds" if entry["holds"] else "VIOLATED"
            lines.append(
                f"derived envelope for {entry['kind']}: {state} "
                f"(worst slack {entry['worst_slack']:.6g})"
            )
    if pipeline == "convergence":
        lines.append(
            f"observed order: delay {res['observed_order_sdde']}, "
            f"delay-free {res['observed_order_sde']} "
            f"(predicted {res['predicted_order']:.3g})"
        )
    return lines


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        result = run(cfg)
        report_path = write_outputs(result, cfg.out_dir)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as err:
        print(f"integration failure: {err}", file=sys.stderr)
        return EXIT_INTEGRATION
    out = Path(report_path).parent
    print(f"wrote {report_path}")
    for name in result.curves:
        print(f"wrote {out / f'curve_{name}.csv'}")
    for line in _summary(result):
        print(line)
    if result.status != "ok":
        print(
            "certificate inapplicable; the report records why and what to adjust",
            file=sys.stderr,
        )
        return EXIT_INAPPLICABLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
