#!/usr/bin/env python
"""
Command-line entry point for the wildfire spread pipeline.

    python cli.py synth-gen --n-fires 200
    python cli.py ingest && python cli.py build-fires && python cli.py stats
    python cli.py evaluate --task multiclass --lw-min 2 --lw-max 3 --repeats 1
"""
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import click

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config import ModelKind, RunConfig, Task, load_run_config  # noqa: E402
from errors import ConfigError, SynthError  # noqa: E402
from pipeline_manager import PipelineManager  # noqa: E402
from synth import SynthSpec, synth_generate  # noqa: E402

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
DEFAULT_DETECTIONS_FILE = "detections.csv"


def _parse_models(value: Optional[str]) -> Optional[List[ModelKind]]:
    if value is None:
        return None
    try:
        return [ModelKind(item.strip().upper()) for item in value.split(",") if item.strip()]
    except ValueError as e:
        raise click.BadParameter(f"{value!r}: models are LR, LSTM, GRU") from e


def _config(ctx: click.Context, stage: str, **overrides: Any) -> RunConfig:
    """Resolve the configuration for a stage or exit non-zero naming the stage."""
    options: Dict[str, Any] = ctx.obj
    merged = {"seed": options["seed"], "out_dir": options["out"], "work_dir": options["work_dir"]}
    merged.update(overrides)
    try:
        return load_run_config(options["config"], **merged)
    except ConfigError as e:
        click.echo(f"{stage}: {e}", err=True)
        ctx.exit(2)


def _finish(ctx: click.Context, result: Dict) -> None:
    if not result["success"]:
        click.echo(f"{result['stage']}: {result['message']}", err=True)
        ctx.exit(1)
    click.echo(result["message"])


def _detections_path(config: RunConfig, explicit: Optional[str]) -> str:
    return explicit or config.detections_path or os.path.join(config.work_dir, DEFAULT_DETECTIONS_FILE)


def _task_option(f):
    return click.option("--task", type=click.Choice([t.value for t in Task]), default=None, help="binary or multiclass")(f)


def _lw_options(f):
    f = click.option("--lw-max", type=int, default=None, help="Largest l_w (<= 8)")(f)
    return click.option("--lw-min", type=int, default=None, help="Smallest l_w (>= 2)")(f)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="KEY=VALUE config file")
@click.option("--seed", type=int, default=None, help="Master seed")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Report output directory")
@click.option("--work-dir", type=click.Path(file_okay=False), default=None, help="Directory for intermediate files")
@click.option("--verbose", is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx, config_path, seed, out, work_dir, verbose):
    """Wildfire reconstruction and spread-prediction pipeline."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)
    ctx.obj = {"config": config_path, "seed": seed, "out": out, "work_dir": work_dir}


@cli.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False), default=None, help="Detection file")
@click.option("--elevation", type=click.Path(dir_okay=False), default=None, help="Elevation lookup CSV")
@click.option("--lenient", is_flag=True, help="Skip malformed rows instead of failing")
@click.pass_context
def ingest(ctx, input_path, elevation, lenient):
    """Parse and encode detections."""
    config = _config(ctx, "ingest", elevation_path=elevation, strict_parse=False if lenient else None)
    _finish(ctx, PipelineManager(config).ingest(_detections_path(config, input_path)))


@cli.command("build-fires")
@click.option("--k", type=int, default=None, help="Neighbours per point")
@click.option("--s-r", type=float, default=None, help="Spatial radius in meters")
@click.option("--t-r", type=float, default=None, help="Temporal radius in seconds")
@click.pass_context
def build_fires(ctx, k, s_r, t_r):
    """Reconstruct wildfires from encoded points."""
    config = _config(ctx, "build-fires", k=k, s_r=s_r, t_r=t_r)
    _finish(ctx, PipelineManager(config).build_fires())


@cli.command()
@click.pass_context
def stats(ctx):
    """Print the wildfire length summary."""
    config = _config(ctx, "stats")
    result = PipelineManager(config).stats()
    if result["success"]:
        for name, value in result["rows"]:
            click.echo(f"{name}: {value}")
    _finish(ctx, result)


@cli.command("make-dataset")
@_task_option
@_lw_options
@click.option("--lw", type=int, default=None, help="Single l_w (overrides the range)")
@click.pass_context
def make_dataset(ctx, task, lw_min, lw_max, lw):
    """Write supervised samples for each l_w."""
    if lw is not None:
        lw_min = lw_max = lw
    config = _config(ctx, "make-dataset", task=task, lw_min=lw_min, lw_max=lw_max)
    _finish(ctx, PipelineManager(config).make_dataset(config.task, config.lw_values))


@cli.command()
@_task_option
@click.option("--lw", type=int, required=True, help="Sequence length of the dataset")
@click.option("--models", default=None, help="Comma list of LR,LSTM,GRU")
@click.pass_context
def train(ctx, task, lw, models):
    """Train and checkpoint models on one dataset file."""
    config = _config(ctx, "train", task=task, lw_min=lw, lw_max=lw, models=_parse_models(models))
    _finish(ctx, PipelineManager(config).train(config.task, lw, config.models))


@cli.command()
@_task_option
@click.option("--models", default=None, help="Comma list of LR,LSTM,GRU")
@_lw_options
@click.option("--repeats", type=int, default=None, help="Protocol repetitions")
@click.option("--folds", type=int, default=None, help="Cross-validation folds")
@click.option("--epochs-lr", type=int, default=None)
@click.option("--epochs-rnn", type=int, default=None)
@click.option("--n-jobs", type=int, default=None, help="Parallel fold training")
@click.pass_context
def evaluate(ctx, task, models, lw_min, lw_max, repeats, folds, epochs_lr, epochs_rnn, n_jobs):
    """Run the full protocol and write the report."""
    config = _config(
        ctx, "evaluate", task=task, models=_parse_models(models), lw_min=lw_min, lw_max=lw_max,
        repeats=repeats, folds=folds, epochs_lr=epochs_lr, epochs_rnn=epochs_rnn, n_jobs=n_jobs,
    )
    result = PipelineManager(config).evaluate(config.task, config.models, config.lw_values, config.repeats, config.seed)
    _finish(ctx, result)


@cli.command()
@_task_option
@click.pass_context
def report(ctx, task):
    """Re-emit report files from the latest stored run."""
    config = _config(ctx, "report", task=task)
    _finish(ctx, PipelineManager(config).report(config.task))


@cli.command("synth-gen")
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Detection file to write")
@click.option("--n-fires", type=int, default=100, show_default=True)
@click.option("--length-min", type=int, default=1, show_default=True)
@click.option("--length-max", type=int, default=6, show_default=True)
@click.option("--step-min", type=float, default=100.0, show_default=True, help="Meters")
@click.option("--step-max", type=float, default=300.0, show_default=True, help="Meters")
@click.option("--p-stay", type=float, default=0.5, show_default=True, help="Direction persistence")
@click.option("--cadence-min", type=int, default=1800, show_default=True, help="Seconds")
@click.option("--cadence-max", type=int, default=10800, show_default=True, help="Seconds")
@click.pass_context
def synth_gen(ctx, output, n_fires, length_min, length_max, step_min, step_max, p_stay, cadence_min, cadence_max):
    """Write a synthetic detection file."""
    config = _config(ctx, "synth-gen")
    path = output or _detections_path(config, None)
    try:
        spec = SynthSpec(
            n_fires=n_fires, length_min=length_min, length_max=length_max,
            step_min_m=step_min, step_max_m=step_max, p_stay=p_stay,
            cadence_min_s=cadence_min, cadence_max_s=cadence_max,
            s_r=config.s_r, t_r=config.t_r, seed=config.seed,
        )
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        fires = synth_generate(spec, path)
    except (SynthError, OSError) as e:
        click.echo(f"synth-gen: {e}", err=True)
        ctx.exit(1)
    click.echo(f"synth-gen: {len(fires)} fires, {sum(f.length for f in fires)} detections -> {path}")


if __name__ == "__main__":
    cli()
