"""Losses and evaluation metrics.

Distances are Euclidean, in sensor pixels. p10 is the percentage of windows
whose mean distance is below 10 pixels.
"""

from typing import NamedTuple

import numpy as np

from evdata.base import EvtkError
from evdata.encode import pixel_coordinates
from gazenet.tensor import Tensor, no_grad

p10_threshold = 10.0


class TrainingError(EvtkError, RuntimeError):
    pass


class MetricReport(NamedTuple):
    mean_distance: float
    p10: float
    distances: np.ndarray       # one mean distance per window
    loss: float = float("nan")

    def csv_header(self):
        return "mean_distance,p10"

    def csv_row(self):
        return f"{self.mean_distance:.6f},{self.p10:.4f}"


def _masked_mean(per_coord, mask):
    mask = np.asarray(mask, dtype=np.float64)
    count = mask.sum()
    if count == 0:
        raise TrainingError("empty loss support: every step is masked")
    return (per_coord * mask[..., None]).sum() * (1.0 / (2 * count))


def mse_loss(pred, target, mask):
    """Mean squared coordinate error over the steps where `mask` is set."""
    diff = pred - Tensor(target)
    return _masked_mean(diff * diff, mask)


def l1_loss(pred, target, mask):
    return _masked_mean((pred - Tensor(target)).abs(), mask)


def smooth_l1_loss(pred, target, mask, beta=1.0):
    d = (pred - Tensor(target)).abs()
    q = d.clip(None, beta)
    return _masked_mean(q * q * (0.5 / beta) + (d - q), mask)


losses = dict(mse=mse_loss, l1=l1_loss, smooth_l1=smooth_l1_loss)


def activation_sparsity(activations, threshold=1e-3):
    """Fraction of activation entries with |a| < threshold."""
    total = near_zero = 0
    for a in activations:
        data = a.data if isinstance(a, Tensor) else np.asarray(a)
        total += data.size
        near_zero += int(np.count_nonzero(np.abs(data) < threshold))
    return near_zero / total if total else 0.0


def window_distances(pred, target):
    """Mean over steps of the per-step Euclidean distance, per window (N x T x 2 input)."""
    d = np.sqrt(np.sum((np.asarray(pred) - np.asarray(target)) ** 2, axis=-1))
    return d.mean(axis=-1)


def report(distances, loss=float("nan")):
    distances = np.asarray(distances, dtype=np.float64)
    if distances.size == 0:
        raise TrainingError("no windows to evaluate")
    p10 = 100.0 * np.count_nonzero(distances < p10_threshold) / distances.size
    return MetricReport(float(distances.mean()), float(p10), distances, loss)


def evaluate(model, batches, geometry, loss_fn=mse_loss):
    """MetricReport of `model` (evaluation mode) over (x, y, close) batches.

    Distances include every step; the loss masks closed-eye steps like the
    training loss does.
    """

    model.eval()
    distances, loss_sum, loss_count = list(), 0.0, 0
    with no_grad():
        for x, y, close in batches:
            pred = model(Tensor(x))
            distances.append(window_distances(pixel_coordinates(pred.data, geometry),
                                              pixel_coordinates(y, geometry)))
            open_steps = close == 0
            if np.any(open_steps):
                loss_sum += loss_fn(pred, y, open_steps).item() * len(x)
                loss_count += len(x)

    loss = loss_sum / loss_count if loss_count else float("nan")
    return report(np.concatenate(distances) if distances else [], loss)


def constant_baseline(targets, geometry):
    """Mean distance when always predicting the sensor centre"""
    w, h = geometry
    centre = np.array([w / 2, h / 2])
    return float(np.mean(window_distances(np.broadcast_to(centre, np.shape(targets)), targets)))
