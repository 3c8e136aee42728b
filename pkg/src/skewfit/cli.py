from __future__ import annotations

import logging
import os
import sys
from typing import Optional

from colorama import Fore, Style, init
from dotenv import load_dotenv
from pydantic import ValidationError

from src.cli.input import CLIInputs, parse_cli_inputs
from src.data.io import load_csv, write_csv, write_report
from src.data.models import RunConfig
from src.utils.progress import progress

from .compare import compare_models, model_stream, run_study
from .distributions import RngStream
from .errors import DomainError, PreconditionError, SkewfitError
from .model import ModelSpec
from .output import ReportBuilder
from .pmc import run_pmc
from .simulate import simulate_dataset

LOG_LEVEL_ENV = "SKEWFIT_LOG_LEVEL"

logger = logging.getLogger(__name__)


def _configure_logging() -> None:
    level = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _require_input(cfg: RunConfig) -> str:
    if not cfg.input_path:
        raise DomainError(f"the {cfg.command} command needs --input or input_path in the config")
    return cfg.input_path


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as handle:
            handle.write(text)
        print(f"{Fore.GREEN}Wrote {path}{Style.RESET_ALL}")


def run_simulate(inputs: CLIInputs) -> int:
    cfg = inputs.config
    data = simulate_dataset(ModelSpec.from_name(cfg.model), cfg.study.truth.to_alpha_params(), cfg.study.n, RngStream(cfg.seed))
    text = write_csv(data, None)
    _emit(text, cfg.output_path)
    return 0


def run_fit(inputs: CLIInputs) -> int:
    cfg = inputs.config
    data = load_csv(_require_input(cfg))
    builder = ReportBuilder(seed=cfg.seed, particles=cfg.particles, iterations=cfg.iterations)
    name = cfg.model.label

    progress.start()
    try:
        progress.update_status(name, "initializing")
        result = run_pmc(
            data,
            ModelSpec.from_name(cfg.model),
            cfg.prior,
            cfg.particles,
            cfg.iterations,
            model_stream(RngStream(cfg.seed), cfg.model),
            workers=cfg.workers,
            on_iteration=progress.iteration_callback(name, cfg.iterations),
        )
        progress.update_status(name, "Done")
    except SkewfitError:
        progress.update_status(name, "Error")
        raise
    finally:
        progress.stop()

    report = builder.fit_report(result, n=data.n)
    builder.print_fit(report, verbose=inputs.verbose, initial_centre=result.initial_estimate.xi.tolist())
    if cfg.output_path:
        write_report(report, cfg.output_path, timings=inputs.timings)
        print(f"{Fore.GREEN}Wrote {cfg.output_path}{Style.RESET_ALL}")
    return 0


def run_compare(inputs: CLIInputs) -> int:
    cfg = inputs.config
    data = load_csv(_require_input(cfg))
    builder = ReportBuilder(seed=cfg.seed, particles=cfg.particles, iterations=cfg.iterations)

    def tracked_fit(data, spec, prior, n_particles, iterations, rng, *, workers):
        name = spec.name.label
        progress.update_status(name, "initializing")
        try:
            result = run_pmc(data, spec, prior, n_particles, iterations, rng, workers=workers, on_iteration=progress.iteration_callback(name, iterations))
        except SkewfitError:
            progress.update_status(name, "Error")
            raise
        progress.update_status(name, "Done")
        return result

    progress.start()
    try:
        comparison = compare_models(data, cfg.prior, cfg.particles, cfg.iterations, RngStream(cfg.seed), models=cfg.models, workers=cfg.workers, fit_fn=tracked_fit)
    finally:
        progress.stop()

    report = builder.compare_report(comparison, n=data.n)
    builder.print_compare(report)
    if inputs.verbose:
        for fit in report.fits.values():
            builder.print_fit(fit, verbose=True)
    if cfg.output_path:
        write_report(report, cfg.output_path, timings=inputs.timings)
        print(f"{Fore.GREEN}Wrote {cfg.output_path}{Style.RESET_ALL}")
    return 0


def run_study_command(inputs: CLIInputs) -> int:
    cfg = inputs.config
    builder = ReportBuilder(seed=cfg.seed, particles=cfg.particles, iterations=cfg.iterations)

    def on_replication(row, error) -> None:
        status = "Error" if error is not None else "Done"
        progress.update_status(f"{row['true_model']} #{row['replication']}", status)

    progress.start()
    try:
        rows, errors = run_study(
            cfg.study.truth.to_alpha_params(),
            cfg.study.n,
            cfg.prior,
            cfg.particles,
            cfg.iterations,
            cfg.replications,
            RngStream(cfg.seed),
            generating_models=cfg.study.generating_models,
            models=cfg.models,
            workers=cfg.workers,
            on_replication=on_replication,
        )
    finally:
        progress.stop()

    report = builder.study_report(rows, errors, n=cfg.study.n, replications=cfg.replications, models=cfg.models)
    builder.print_study(report)
    if inputs.csv_path:
        builder.study_frame(report).to_csv(inputs.csv_path, index=False, lineterminator="\n")
        print(f"{Fore.GREEN}Wrote {inputs.csv_path}{Style.RESET_ALL}")
    if cfg.output_path:
        write_report(report, cfg.output_path, timings=inputs.timings)
        print(f"{Fore.GREEN}Wrote {cfg.output_path}{Style.RESET_ALL}")
    return 0


COMMANDS = {
    "simulate": run_simulate,
    "fit": run_fit,
    "compare": run_compare,
    "study": run_study_command,
}


def main(argv: Optional[list[str]] = None) -> int:
    load_dotenv()
    _configure_logging()
    init(autoreset=True)

    try:
        inputs = parse_cli_inputs(argv, description="Objective Bayes fitting of the multivariate skew-t family")
    except (ValidationError, ValueError) as exc:
        print(f"{Fore.RED}Invalid configuration: {exc}{Style.RESET_ALL}")
        return 2
    logger.debug("resolved config: %s", inputs.config.model_dump_json())

    try:
        return COMMANDS[inputs.config.command](inputs)
    except PreconditionError as exc:
        print(f"{Fore.RED}{exc.condition} violated: {exc}{Style.RESET_ALL}")
        return 2
    except SkewfitError as exc:
        print(f"{Fore.RED}{type(exc).__name__}: {exc}{Style.RESET_ALL}")
        return 2
    except OSError as exc:
        print(f"{Fore.RED}Could not write output: {exc}{Style.RESET_ALL}")
        return 2
    except KeyboardInterrupt:
        print("\n\nInterrupt received. Exiting...")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
