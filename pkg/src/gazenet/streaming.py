"""Frame-by-frame inference with the causal spatiotemporal net.

Each block keeps a FIFO with the last k-1 inputs of its temporal convolution
(k = temporal kernel length). A new frame is pushed through the blocks one
after the other: the block convolves its FIFO plus the new input, keeps only
the newest output step and passes it on. Everything else in the network works
per frame, so the estimates equal those of a batch forward over the whole
sequence.
"""

import logging
from collections import deque

import numpy as np

from evdata.base import ConfigError
from evdata.encode import causal_bin_stream, normalize, pixel_coordinates

from .models import SpatiotemporalNet
from .tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


class StreamingSession:
    """Per-stream state; use one session per event source."""

    def __init__(self, model):
        if not isinstance(model, SpatiotemporalNet):
            raise ConfigError(f"streaming inference needs the causal spatiotemporal net, "
                              f"not {type(model).__name__}")
        self.model = model.eval()
        self.fifos = [deque(maxlen=block.temporal.kernel - 1) for block in model.blocks]
        self.frames = 0

    def push(self, frame):
        """Feed one C x H x W frame, return the 2-vector estimate for it."""

        x = np.asarray(frame, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]

        with no_grad():
            for block, fifo in zip(self.model.blocks, self.fifos):
                window = np.stack(list(fifo) + [x])[None]
                if fifo.maxlen:
                    fifo.append(x)
                y = block.temporal(Tensor(window)).data[:, -1]
                y = block.frame_forward(Tensor(y))
                x = y.data[0]
            out = self.model.head_forward(Tensor(x[None, None]))

        self.frames += 1
        return out.data[0, 0]


def streaming_infer(model, frames):
    """Yield one estimate per frame of `frames` (any iterable of C x H x W arrays)."""
    session = StreamingSession(model)
    for frame in frames:
        yield session.push(frame)


def stream_gaze(model, events, geometry, encode_cfg, t_start=0, t_end=None):
    """Pixel gaze estimates for a live event iterator, one per frame period.

    Frames come from `causal_bin_stream` and are normalised the way the
    training frames are; outputs are mapped back to sensor pixels.
    """

    frames = causal_bin_stream(events, encode_cfg.frame_period_us, geometry,
                               encode_cfg.downsample, t_start, t_end)
    if encode_cfg.normalization == "max_abs":
        frames = (normalize(f) for f in frames)

    for k, estimate in enumerate(streaming_infer(model, frames)):
        yield k, pixel_coordinates(estimate, geometry)
