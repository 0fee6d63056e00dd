"""Training loop.

Randomness is re-derived from the run seed at every epoch (shuffling order,
dropout masks), so a run resumed from an epoch checkpoint continues exactly
like an uninterrupted one.
"""

import logging
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np

from evdata.augment import expand_dataset
from evdata.base import ConfigError, SensorGeometry, derive_seed
from gazenet.checkpoint import save_checkpoint, load_checkpoint
from gazenet.layers import l1_activation_penalty
from gazenet.models import build_model
from gazenet.tensor import Tensor, first_nonfinite

from .config import loads_config
from .dataset import WindowSet, encode_dataset, split_recordings, prefetch
from .metrics import TrainingError, activation_sparsity, evaluate, losses
from .optim import make_optimizer, lr_schedule

logger = logging.getLogger(__name__)
epoch_logger = logger.getChild("epoch")

log_columns = ("epoch", "train_loss", "val_loss", "val_dist", "lr")


class EpochRecord(NamedTuple):
    epoch: int
    train_loss: float
    val_loss: float
    val_dist: float
    lr: float

    def csv_row(self):
        return ",".join([str(self.epoch)] + [repr(float(v)) for v in self[1:]])


class TrainResult(NamedTuple):
    history: list
    checkpoints: dict
    log_path: Path
    best_dist: float
    best_val_loss: float


def model_config_for(config):
    """The configured network, with its input channels matched to the frames"""
    cfg = config.model_config
    channels = config.encode.num_bins if config.train.input_kind == "voxel" else 1
    return cfg._replace(in_channels=channels)


def window_fingerprint(config):
    tc = config.train
    return dict(augment=config.augment,
                window=dict(length=tc.train_length, stride=tc.train_stride,
                            val_stride=tc.val_stride))


def prepare_windows(config, bundles, digests=None, cache=None):
    """Split, augment the training part, encode; returns (train, val) WindowSets."""

    tc = config.train
    train_bundles, val_bundles = split_recordings(bundles, tc.val_fraction)
    train_bundles = expand_dataset(train_bundles, config.augment)

    fingerprint = window_fingerprint(config)
    kind = tc.input_kind
    train_set = WindowSet(encode_dataset(train_bundles, config.encode, kind, cache, digests,
                                         **fingerprint), tc.train_length, tc.train_stride)
    val_set = WindowSet(encode_dataset(val_bundles, config.encode, kind, cache, digests,
                                       **fingerprint), tc.train_length, tc.val_stride)

    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigError(f"recordings are shorter than one window of {tc.train_length} steps")
    logger.info(f"{len(train_set)} training windows from {len(train_bundles)} recordings, "
                f"{len(val_set)} validation windows from {len(val_bundles)}")
    return train_set, val_set


class Trainer:

    def __init__(self, config, train_set, val_set, geometry, out_dir):
        self.config = config
        self.tc = tc = config.train
        self.train_set = train_set
        self.val_set = val_set
        self.geometry = geometry
        self.out_dir = Path(out_dir)

        self.model = build_model(tc.model, model_config_for(config), tc.seed)
        self.optimizer = make_optimizer(self.model, tc)
        self.loss_fn = losses[tc.loss]
        self.lam = self.model.sparsity_lambda if tc.sparsity_lambda is None else tc.sparsity_lambda

        self.steps_per_epoch = train_set.batch_count(tc.batch_size)
        self.total_steps = tc.epochs * self.steps_per_epoch
        self.epoch = 0
        self.step = 0
        self.best_dist = math.inf
        self.best_val_loss = math.inf
        self.history = list()
        self.sparsity = float("nan")

    @property
    def log_path(self):
        return self.out_dir / "train.csv"

    def checkpoint_path(self, kind):
        return self.out_dir / "checkpoints" / f"{kind}.ckpt"

    def lr_at(self, epoch, step):
        tc = self.tc
        if tc.schedule == "cosine":
            return tc.lr * lr_schedule("cosine", step, self.total_steps, tc.warmup_fraction)
        if tc.schedule == "step":
            return tc.lr * lr_schedule("step", epoch, step_size=tc.step_epochs, gamma=tc.step_gamma)
        return tc.lr

    def _check_finite(self, pred, loss):
        named = [("prediction", pred), ("loss", loss)]
        named += [(f"grad of {name}", p.grad) for name, p in self.model.named_parameters()
                  if p.grad is not None]
        name = first_nonfinite(named)
        if name is not None:
            raise TrainingError(f"epoch {self.epoch + 1}, step {self.step}: "
                                f"non-finite values in {name}")

    def train_epoch(self):
        tc = self.tc
        self.model.train()
        self.model.reseed(derive_seed(tc.seed, f"dropout/{self.epoch}"))
        rng = np.random.default_rng(derive_seed(tc.seed, f"shuffle/{self.epoch}"))

        loss_sum, count, lr = 0.0, 0, self.lr_at(self.epoch, self.step)
        for x, y, close in prefetch(self.train_set.batches(tc.batch_size, rng), tc.prefetch):
            lr = self.lr_at(self.epoch, self.step)
            open_steps = close == 0
            self.step += 1
            if not np.any(open_steps):
                logger.debug(f"step {self.step}: every step closed, batch skipped")
                continue

            pred = self.model(Tensor(x))
            loss = self.loss_fn(pred, y, open_steps)
            if self.lam:
                loss = loss + l1_activation_penalty(self.model.penalty_terms(), self.lam)

            self.optimizer.zero_grad()
            if np.isfinite(loss.item()):
                loss.backward()
            self._check_finite(pred, loss)
            self.optimizer.step(lr)

            loss_sum += loss.item() * len(x)
            count += len(x)

        if hasattr(self.model, "activations") and self.model.activations:
            self.sparsity = activation_sparsity(self.model.activations)
        return loss_sum / count if count else float("nan"), lr

    def run(self, stop_after=None):
        """Train up to the configured epoch count (or `stop_after` epochs in total)."""

        tc = self.tc
        last = tc.epochs if stop_after is None else min(tc.epochs, stop_after)

        while self.epoch < last:
            train_loss, lr = self.train_epoch()
            val = evaluate(self.model, self.val_set.batches(tc.batch_size), self.geometry,
                           self.loss_fn)
            self.epoch += 1

            record = EpochRecord(self.epoch, train_loss, val.loss, val.mean_distance, lr)
            self.history.append(record)
            self.write_log()
            epoch_logger.info(f"{self.epoch:4d}/{tc.epochs}  train {train_loss:.5f}  "
                              f"val {val.loss:.5f}  dist {val.mean_distance:.2f}px  "
                              f"p10 {val.p10:.1f}%  lr {lr:.3g}"
                              + (f"  sparsity {self.sparsity:.3f}" if self.lam else ""))

            if val.mean_distance < self.best_dist:
                self.best_dist = val.mean_distance
                if "best_dist" in tc.checkpoints:
                    self.save("best_dist")
            if np.isfinite(val.loss) and val.loss < self.best_val_loss:
                self.best_val_loss = val.loss
                if "best_val_loss" in tc.checkpoints:
                    self.save("best_val_loss")
            self.save("last")

        if self.epoch == tc.epochs and "final" in tc.checkpoints:
            self.save("final")

        return TrainResult(list(self.history),
                           {k: self.checkpoint_path(k) for k in tc.checkpoints
                            if self.checkpoint_path(k).exists()},
                           self.log_path, self.best_dist, self.best_val_loss)

    def write_log(self):
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        lines = [",".join(log_columns)] + [r.csv_row() for r in self.history]
        self.log_path.write_text("\n".join(lines) + "\n")

    def meta(self):
        return dict(model=self.tc.model, config=self.config.dumps(), epoch=self.epoch,
                    step=self.step, geometry=list(self.geometry),
                    best_dist=self.best_dist, best_val_loss=self.best_val_loss,
                    history=[list(r) for r in self.history])

    def save(self, kind):
        save_checkpoint(self.checkpoint_path(kind), self.model, self.optimizer, self.meta())

    def resume(self, path):
        ckpt = load_checkpoint(path)
        if ckpt.meta.get("model") != self.tc.model:
            raise ConfigError(f"checkpoint {path} holds a {ckpt.meta.get('model')} model, "
                              f"configured model is {self.tc.model}")
        self.model.load_state_dict(ckpt.model)
        self.optimizer.load_state_dict(ckpt.optimizer)
        self.epoch = ckpt.meta["epoch"]
        self.step = ckpt.meta["step"]
        self.best_dist = ckpt.meta["best_dist"]
        self.best_val_loss = ckpt.meta["best_val_loss"]
        self.history = [EpochRecord(int(r[0]), *map(float, r[1:])) for r in ckpt.meta["history"]]
        logger.info(f"resumed from {path} at epoch {self.epoch}")


def train(config, bundles, out_dir, digests=None, cache=None, resume=None, stop_after=None):
    """Train the configured model on `bundles`; see `Trainer.run`."""

    config.validate()
    train_set, val_set = prepare_windows(config, bundles, digests, cache)
    trainer = Trainer(config, train_set, val_set, bundles[0].stream.geometry, out_dir)
    if resume is not None:
        trainer.resume(resume)
    return trainer.run(stop_after)


def load_trained(path):
    """Model, run configuration and sensor geometry stored in checkpoint `path`"""

    ckpt = load_checkpoint(path)
    try:
        config = loads_config(ckpt.meta["config"], source=f"{path}:config")
        geometry = SensorGeometry(*ckpt.meta["geometry"])
    except KeyError as ex:
        raise ConfigError(f"checkpoint {path} has no {ex} entry") from None

    model = build_model(config.train.model, model_config_for(config), config.train.seed)
    model.load_state_dict(ckpt.model)
    logger.info(f"loaded {config.train.model} model from {path} (epoch {ckpt.meta.get('epoch')})")
    return model.eval(), config, geometry


def evaluation_recordings(config, bundles, digests=None, cache=None, all_recordings=False):
    """Encoded recordings to evaluate on: the validation split, or all of `bundles`"""

    if not all_recordings:
        _, bundles = split_recordings(bundles, config.train.val_fraction)
    return encode_dataset(bundles, config.encode, config.train.input_kind, cache, digests,
                          **window_fingerprint(config))
