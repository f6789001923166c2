"""Command-line entry point: ``fransim --experiment fig4 --out results/``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .config import ExperimentOverrides, load_config, with_overrides
from .errors import ConfigError
from .handover import HandoverKind, Procedure
from .report import format_csv, format_summary, summary_checks
from .sim import MetricsReport, SimConfig, run_experiment

log = logging.getLogger("fransim")

EXPERIMENTS = ("fig4", "fig5", "fig6", "custom")
OUT_ENV = "FRANSIM_OUT"
DEFAULT_OUT = "fransim-out"

FIG4_ARRIVAL_RATES = tuple(round(0.02 + 0.04 * i, 2) for i in range(8))
FIG5_HOLDING_TIMES = tuple(float(h) for h in range(1, 11))
FIG5_ARRIVAL_RATE = 0.1
FIG6_FUES_PER_FAP = tuple(range(1, 9))
FIG6_N_FAPS = (10, 20, 40)
FIG4_KINDS = (HandoverKind.FAP_TO_FAP.value, HandoverKind.FAP_TO_MRRH.value)


@dataclass(frozen=True)
class RunSpec:
    experiment: str
    config_path: Path | None = None
    out_dir: Path | None = None
    seed: int | None = None
    reps: int | None = None
    verbosity: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")

    def resolved_out(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def build_report(experiment: str, config: SimConfig, ov: ExperimentOverrides) -> MetricsReport:
    """Run one experiment and return its report with metadata filled in."""
    progress = log.info
    procedures = ov.procedures or tuple(p.value for p in Procedure)
    meta = {"experiment": experiment, "seed": str(config.seed),
            "replications": str(config.replications)}
    if experiment == "fig6" or (experiment == "custom" and ov.sweep_param in ("n_fues_per_fap", "n_faps")):
        if experiment == "fig6":
            param, values = "n_fues_per_fap", ov.values or FIG6_FUES_PER_FAP
            groups = ov.n_faps or FIG6_N_FAPS
        else:
            param, values, groups = ov.sweep_param, ov.values, (None,)
        report = MetricsReport(metadata={**meta, "sweep_param": param,
                                         "n_snapshots": str(config.n_snapshots)})
        for n_faps in groups:
            cfg = config if n_faps is None else config.with_param("n_faps", n_faps)
            sub = run_experiment(cfg, param, values, progress=progress)
            report.extend(sub, suffix="" if n_faps is None else f"@n_faps={n_faps}")
        return report

    if experiment == "fig4":
        param, values = "arrival_rate", ov.values or FIG4_ARRIVAL_RATES
    elif experiment == "fig5":
        param, values = "mean_holding_time", ov.values or FIG5_HOLDING_TIMES
        config = config.with_param("arrival_rate", FIG5_ARRIVAL_RATE)
    else:
        if ov.sweep_param is None or ov.values is None:
            raise ConfigError("custom experiments need experiment.sweep_param and experiment.values")
        param, values = ov.sweep_param, ov.values
    kinds = ov.kinds or FIG4_KINDS
    report = run_experiment(config, param, values, procedures=procedures, kinds=kinds, progress=progress)
    report.metadata = {**meta, "sweep_param": param, "horizon": repr(config.horizon)}
    for name in ("arrival_rate", "mean_holding_time", "residence_rate"):
        if name != param:
            report.metadata[name] = repr(getattr(config.session, name))
    return report


def run(spec: RunSpec) -> int:
    """Run ``spec`` and write ``<experiment>.csv`` and ``summary.txt``; returns the exit status."""
    out = spec.resolved_out()
    written: list[Path] = []
    try:
        if spec.config_path is not None:
            config, ov = load_config(spec.config_path)
        else:
            config, ov = SimConfig(), ExperimentOverrides()
        config = with_overrides(config, seed=spec.seed, replications=spec.reps)
        report = build_report(spec.experiment, config, ov)
        checks = summary_checks(report)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in ((f"{spec.experiment}.csv", format_csv(report)),
                           ("summary.txt", format_summary(report, checks))):
            path = out / name
            tmp = path.with_name(path.name + ".part")
            try:
                tmp.write_text(text, encoding="utf-8")
                tmp.replace(path)
            finally:
                tmp.unlink(missing_ok=True)
            written.append(path)
        if spec.verbosity:
            sys.stdout.write("\n".join(c.line() for c in checks) + "\n")
        return 0
    except (ConfigError, OSError, ValueError) as exc:
        for path in written:
            path.unlink(missing_ok=True)
        sys.stderr.write(f"fransim: error: {exc}\n")
        return 1


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fransim", description="Fog RAN handover and resource allocation simulator.")
    p.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, help="TOML configuration file (defaults apply when omitted)")
    p.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--seed", type=int, help="override simulation.seed")
    p.add_argument("--reps", type=int, help="override simulation.replications")
    p.add_argument("--quiet", action="store_true", help="no progress or check output")
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        spec = RunSpec(args.experiment, args.config, args.out, args.seed, args.reps,
                       verbosity=0 if args.quiet else 1)
    except ConfigError as exc:
        sys.stderr.write(f"fransim: error: {exc}\n")
        return 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
