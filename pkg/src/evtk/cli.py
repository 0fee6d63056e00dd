#!/usr/bin/env python3

import click
import itertools
import logging
import os
import sys
from pathlib import Path

from evdata.augment import expand_dataset
from evdata.base import ConfigError, EvtkError, SensorGeometry
from evdata.cache import VoxelCache, cache_dir_env
from evdata.encode import pixel_coordinates
from evdata.evlogging import setup_logging
from evdata.factory import make_reader
from evdata.synth import generate_dataset
from gazenet.streaming import stream_gaze
from gazenet.tensor import Tensor, no_grad

from .ablation import ablation_run, ablation_settings, format_table
from .config import RunConfig, TrainConfig, load_config
from .dataset import WindowSet, load_dataset, write_dataset
from .metrics import evaluate
from .train import (train as run_training, prepare_windows, load_trained,
                    evaluation_recordings)

logger = logging.getLogger(__name__)


def _lookup(config, key):
    for name in key.split("."):
        config = getattr(config, name)
    return config


class EvtkGroup(click.Group):
    """Command group with the exit codes of the toolkit.

    0 on success, 1 for usage and configuration errors, 2 for data and I/O
    errors (bad input files, failed writes, training failures).
    """

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args=args, prog_name=prog_name, complete_var=complete_var,
                              standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else 0

        except click.Abort:
            click.echo("Aborted!", err=True)
            code = 1

        except click.ClickException as ex:
            ex.show()
            code = 1

        except ConfigError as ex:
            click.echo(f"configuration error: {ex}", err=True)
            code = 1

        except (EvtkError, OSError, ValueError) as ex:
            click.echo(f"error: {ex}", err=True)
            code = 2

        if standalone_mode:
            sys.exit(code)
        return code


class Run:
    """Per-invocation state shared by the sub-commands"""

    def __init__(self, config_path, overrides, out, seed, cache_dir):
        self.config_path = config_path
        self.overrides = overrides
        self.seed = seed
        self.out = Path(out)
        self._cache_dir = cache_dir

    def config(self, preset=None, trained=None):
        """Resolved configuration of the run, echoed to OUT/config.resolved.

        With `trained`, the configuration stored in a checkpoint, as the
        base; overrides may then not touch what the weights depend on.
        """

        if trained is not None:
            base = trained
        else:
            base = RunConfig(train=TrainConfig.preset(preset)) if preset else None
        config = load_config(self.config_path, self.overrides, base)
        if self.seed is not None:
            config = config.with_seed(self.seed)
        if trained is not None:
            frozen = ["encode", trained.train.model, "train.model"]
            changed = [key for key in frozen if _lookup(config, key) != _lookup(trained, key)]
            if changed:
                raise ConfigError(f"{', '.join(changed)} cannot differ from the checkpoint")
        self.out.mkdir(parents=True, exist_ok=True)
        config.save(self.out / "config.resolved")
        return config

    def cache(self):
        root = self._cache_dir or os.environ.get(cache_dir_env) or self.out / "cache"
        return VoxelCache(root)


@click.group(cls=EvtkGroup)
@click.option('-c', '--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
              help="configuration file, one 'section.field = value' per line")
@click.option('-s', '--set', 'overrides', multiple=True, metavar="KEY=VALUE",
              help="override one configuration value")
@click.option('--out', default="evtk-out", type=click.Path(file_okay=False),
              help="output directory")
@click.option('--seed', type=int, help="top-level seed of the run")
@click.option('--cache-dir', type=click.Path(file_okay=False),
              help=f"voxel cache directory (default: ${cache_dir_env} or OUT/cache)")
@click.option('-o', '--loglevel', default="INFO", show_default=True,
              help="logging level: debug, info, warning or error")
@click.pass_context
def evtk(ctx, config_path, overrides, out, seed, cache_dir, loglevel):
    """Event-based eye tracking toolkit"""

    setup_logging(loglevel.upper())
    ctx.obj = Run(config_path, overrides, out, seed, cache_dir)


@evtk.command()
@click.option('-n', '--n', 'count', default=8, help="number of recordings")
@click.option('-W', '--width', default=640, type=click.IntRange(min=1))
@click.option('-H', '--height', default=480, type=click.IntRange(min=1))
@click.option('--dest', type=click.Path(file_okay=False), help="default: OUT/dataset")
@click.pass_context
def synth(ctx, count, width, height, dest):
    """Generate a synthetic dataset"""

    config = ctx.obj.config()
    geometry = SensorGeometry(width, height)
    bundles = generate_dataset(count, config.train.seed, config.trajectory, config.events,
                               geometry)
    write_dataset(bundles, dest or ctx.obj.out / "dataset")


@evtk.command()
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@click.option('--dest', type=click.Path(file_okay=False), help="default: OUT/augmented")
@click.pass_context
def augment(ctx, dataset, dest):
    """Write a dataset expanded with augmented copies"""

    config = ctx.obj.config()
    bundles, _ = load_dataset(dataset)
    write_dataset(expand_dataset(bundles, config.augment), dest or ctx.obj.out / "augmented")


@evtk.command()
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@click.option('--preset', type=click.Choice(["spatiotemporal", "knightpupil"]))
@click.pass_context
def encode(ctx, dataset, preset):
    """Fill the voxel cache with the training and validation frames"""

    config = ctx.obj.config(preset)
    cache = ctx.obj.cache()
    bundles, digests = load_dataset(dataset)
    prepare_windows(config, bundles, digests, cache)
    logger.info(f"cache {cache.root}: {cache.hits} hits, {cache.misses} misses")


@evtk.command()
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@click.option('--preset', type=click.Choice(["spatiotemporal", "knightpupil"]),
              help="start from the training set-up of one network")
@click.option('--resume', type=click.Path(exists=True, dir_okay=False),
              help="continue from an epoch checkpoint")
@click.pass_context
def train(ctx, dataset, preset, resume):
    """Train a gaze network"""

    config = ctx.obj.config(preset)
    bundles, digests = load_dataset(dataset)
    result = run_training(config, bundles, ctx.obj.out, digests, ctx.obj.cache(), resume)
    logger.info(f"best validation distance {result.best_dist:.3f}px, "
                f"log in {result.log_path}")


@evtk.command(name="eval")
@click.argument('checkpoint', type=click.Path(exists=True, dir_okay=False))
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@click.option('--all', 'all_recordings', is_flag=True,
              help="evaluate every recording, not only the validation split")
@click.option('--predictions', type=click.Path(dir_okay=False),
              help="write per-step estimates of whole recordings as CSV")
@click.pass_context
def evaluate_checkpoint(ctx, checkpoint, dataset, all_recordings, predictions):
    """Print mean distance and p10 of a checkpoint as one CSV row"""

    model, trained, geometry = load_trained(checkpoint)
    config = ctx.obj.config(trained=trained)
    bundles, digests = load_dataset(dataset)
    recordings = evaluation_recordings(config, bundles, digests, ctx.obj.cache(),
                                       all_recordings)

    windows = WindowSet(recordings, config.train.train_length, config.train.val_stride)
    result = evaluate(model, windows.batches(config.train.batch_size), geometry)
    click.echo(result.csv_row())

    if predictions:
        rows = ["recording,step,x,y"]
        with no_grad():
            for rec in recordings:
                out = model(Tensor(rec.frames[None])).data[0]
                xy = pixel_coordinates(out, geometry)
                rows += [f"{rec.id},{k},{x!r},{y!r}" for k, (x, y) in enumerate(xy.tolist())]
        Path(predictions).write_text("\n".join(rows) + "\n")


@evtk.command()
@click.argument('checkpoint', type=click.Path(exists=True, dir_okay=False))
@click.argument('events', type=click.Path(exists=True, dir_okay=False))
@click.option('--labels', type=click.Path(exists=True, dir_okay=False),
              help="label file; its first and last step bound the stream")
@click.option('--dest', type=click.Path(dir_okay=False), help="default: standard output")
@click.pass_context
def stream(ctx, checkpoint, events, labels, dest):
    """Estimate gaze frame by frame from an event file"""

    model, trained, geometry = load_trained(checkpoint)
    config = ctx.obj.config(trained=trained)
    source = make_reader(events, geometry).read()

    t_start, t_end, limit = 0, None, None
    if labels:
        track = make_reader(labels).read()
        t_start, t_end, limit = track.t0, track.t_end, len(track)
        source = source.window(t_start, t_end)

    name = Path(events).stem
    rows = ["recording,step,x,y"]
    for k, (x, y) in itertools.islice(
            stream_gaze(model, source, source.geometry, config.encode, t_start, t_end), limit):
        rows.append(f"{name},{k},{float(x)!r},{float(y)!r}")

    text = "\n".join(rows) + "\n"
    if dest:
        Path(dest).write_text(text)
    else:
        click.echo(text, nl=False)


@evtk.command()
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@click.option('--preset', type=click.Choice(["spatiotemporal", "knightpupil"]))
@click.option('--setting', 'settings', multiple=True, type=click.Choice(ablation_settings),
              help="run only these settings (default: all)")
@click.pass_context
def ablate(ctx, dataset, preset, settings):
    """Train once per augmentation setting and print the comparison table"""

    config = ctx.obj.config(preset)
    bundles, digests = load_dataset(dataset)
    rows = ablation_run(config, bundles, ctx.obj.out / "ablation", settings or ablation_settings,
                        digests, ctx.obj.cache())
    click.echo(format_table(rows), nl=False)


main = evtk

if __name__ == "__main__":
    evtk()
