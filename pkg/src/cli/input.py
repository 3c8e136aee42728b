import argparse
import os
from dataclasses import dataclass
from typing import Optional

from colorama import Fore, Style

from src.data.io import load_run_config
from src.data.models import PRESETS, RunConfig
from src.skewfit.model import ModelName

WORKERS_ENV = "SKEWFIT_WORKERS"


def add_common_args(parser: argparse.ArgumentParser, *, include_input: bool = True, include_model: bool = False) -> argparse.ArgumentParser:
    parser.add_argument("--config", type=str, required=False, help="JSON file mirroring RunConfig")
    parser.add_argument("--preset", choices=sorted(PRESETS), required=False, help="Particle/iteration preset (full: N=20000,T=6; desk: N=4000,T=5)")
    parser.add_argument("--seed", type=int, required=False, help="Unsigned 64-bit run seed")
    parser.add_argument("--out", type=str, required=False, help="Output path (report JSON, or CSV for simulate)")
    parser.add_argument("--workers", type=int, required=False, help=f"Worker threads (default: ${WORKERS_ENV} or 1)")
    parser.add_argument("--particles", type=int, required=False, help="Number of particles N")
    parser.add_argument("--iterations", type=int, required=False, help="Number of iterations T")
    parser.add_argument("--timings", action="store_true", help="Keep wall times in the written report")
    parser.add_argument("--verbose", action="store_true", help="Print diagnostics and the initialization centre")
    if include_input:
        parser.add_argument("--input", type=str, required=False, help="Dataset CSV (comma-separated, optional header)")
    if include_model:
        parser.add_argument("--model", type=str, choices=[m.value for m in ModelName], required=False, help="Model to fit or simulate from")
    return parser


def parse_models(models_arg: str | None) -> list[ModelName]:
    if not models_arg:
        return list(ModelName)
    return [ModelName(name.strip()) for name in models_arg.split(",") if name.strip()]


def _env_workers() -> Optional[int]:
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return None
    try:
        return int(value)
    except ValueError:
        print(f"{Fore.YELLOW}Ignoring non-integer {WORKERS_ENV}={value!r}{Style.RESET_ALL}")
        return None


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then environment defaults, then command-line flags; later ones win."""
    cfg = load_run_config(args.config) if getattr(args, "config", None) else RunConfig()
    cfg = cfg.with_preset(getattr(args, "preset", None))

    updates: dict = {"command": args.command}
    env_workers = _env_workers()
    if env_workers is not None and "workers" not in cfg.model_fields_set:
        updates["workers"] = env_workers
    flag_fields = {
        "seed": "seed",
        "out": "output_path",
        "workers": "workers",
        "particles": "particles",
        "iterations": "iterations",
        "input": "input_path",
        "model": "model",
        "replications": "replications",
    }
    for flag, field in flag_fields.items():
        value = getattr(args, flag, None)
        if value is not None:
            updates[field] = value
    if getattr(args, "models", None):
        updates["models"] = parse_models(args.models)
    if getattr(args, "n", None) is not None:
        updates["study"] = cfg.study.model_copy(update={"n": args.n})
    # Re-validate so flag values obey the same constraints as file values.
    return RunConfig.model_validate({**cfg.model_dump(), **updates})


@dataclass
class CLIInputs:
    config: RunConfig
    timings: bool = False
    verbose: bool = False
    csv_path: Optional[str] = None


def build_parser(description: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skewfit", description=description)
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = add_common_args(commands.add_parser("simulate", help="Simulate a dataset from the configured truth"), include_input=False, include_model=True)
    simulate.add_argument("--n", type=int, required=False, help="Number of rows")

    add_common_args(commands.add_parser("fit", help="Fit one model by population Monte Carlo"), include_model=True)

    compare = add_common_args(commands.add_parser("compare", help="Posterior probabilities of the candidate models"))
    compare.add_argument("--models", type=str, required=False, help="Comma-separated subset of normal,t,sn,st")

    study = add_common_args(commands.add_parser("study", help="Simulation study over generating models"), include_input=False)
    study.add_argument("--replications", type=int, required=False, help="Replications per generating model")
    study.add_argument("--n", type=int, required=False, help="Rows per simulated dataset")
    study.add_argument("--models", type=str, required=False, help="Comma-separated candidate models")
    study.add_argument("--csv", type=str, required=False, help="Also write the stacked probability table as CSV")
    return parser


def parse_cli_inputs(argv: Optional[list[str]] = None, *, description: str) -> CLIInputs:
    args = build_parser(description).parse_args(argv)
    return CLIInputs(
        config=resolve_run_config(args),
        timings=getattr(args, "timings", False),
        verbose=getattr(args, "verbose", False),
        csv_path=getattr(args, "csv", None),
    )
