"""Augmentation ablation: one training run per augmentation setting.

All runs share the data split, the seed and every other setting; only the
augmentation switches differ. Each row reports the validation mean distance
and p10 of the run's best-distance checkpoint.
"""

import logging
from pathlib import Path
from typing import NamedTuple

from evdata.base import ConfigError
from gazenet.checkpoint import load_checkpoint

from .metrics import evaluate
from .train import Trainer, prepare_windows

logger = logging.getLogger(__name__)

ablation_settings = ("w/o temporal shift", "w/o spatial flip", "w/o event deletion",
                     "full", "none")


class AblationRow(NamedTuple):
    setting: str
    distance: float
    p10: float


def setting_config(augment, setting):
    """The augmentation config of one ablation setting, derived from `augment`"""
    full = augment._replace(temporal_shift=True, spatial_flip=True, event_deletion=True)
    if setting == "full":
        return full
    if setting == "none":
        return full._replace(temporal_shift=False, spatial_flip=False, event_deletion=False)
    if setting == "w/o temporal shift":
        return full._replace(temporal_shift=False)
    if setting == "w/o spatial flip":
        return full._replace(spatial_flip=False)
    if setting == "w/o event deletion":
        return full._replace(event_deletion=False)
    raise ConfigError(f"unknown ablation setting '{setting}'")


def _slug(setting):
    return setting.replace("w/o ", "without-").replace(" ", "-")


def ablation_run(config, bundles, out_dir, toggles=ablation_settings, digests=None, cache=None):
    out_dir = Path(out_dir)
    rows = list()

    for setting in toggles:
        run_config = config._replace(augment=setting_config(config.augment, setting))
        train_set, val_set = prepare_windows(run_config, bundles, digests, cache)
        trainer = Trainer(run_config, train_set, val_set, bundles[0].stream.geometry,
                          out_dir / _slug(setting))
        result = trainer.run()

        best = result.checkpoints.get("best_dist")
        if best is not None:
            trainer.model.load_state_dict(load_checkpoint(best).model)
        report = evaluate(trainer.model, val_set.batches(run_config.train.batch_size),
                          trainer.geometry)

        row = AblationRow(setting, report.mean_distance, report.p10)
        logger.info(f"{setting:<20} distance {row.distance:.3f}px  p10 {row.p10:.2f}%")
        rows.append(row)

    write_table(rows, out_dir / "ablation.csv")
    return rows


def format_table(rows):
    lines = ["augmentation,distance,p10"]
    lines += [f"{r.setting},{r.distance:.6f},{r.p10:.4f}" for r in rows]
    return "\n".join(lines) + "\n"


def write_table(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_table(rows))
