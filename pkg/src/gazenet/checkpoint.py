"""Model checkpoints in the named tensor container.

Entries are prefixed by their role: `model/<parameter or buffer>`,
`optim/<state>`, and a `meta` entry holding UTF-8 JSON (model kind, run
configuration, epoch, best metrics).
"""

import json
import logging
from typing import NamedTuple

import numpy as np

from evdata.base import FormatError
from evdata.container import encode_tensors, decode_tensors
from evdata.evfile import atomic_write

logger = logging.getLogger(__name__)

checkpoint_version = 1


class Checkpoint(NamedTuple):
    model: dict
    optimizer: dict
    meta: dict


def encode_checkpoint(model_state, optimizer_state=None, meta=None):
    meta = dict(meta or {}, checkpoint_version=checkpoint_version)
    tensors = {f"model/{k}": v for k, v in model_state.items()}
    tensors.update({f"optim/{k}": v for k, v in (optimizer_state or {}).items()})
    tensors["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    return encode_tensors(tensors)


def save_checkpoint(path, model, optimizer=None, meta=None):
    data = encode_checkpoint(model.state_dict(),
                             None if optimizer is None else optimizer.state_dict(), meta)
    atomic_write(path, data)
    logger.info(f"checkpoint {path}")


def load_checkpoint(path):
    with open(path, "rb") as f:
        tensors = decode_tensors(f.read(), source=str(path))

    if "meta" not in tensors:
        raise FormatError("checkpoint has no meta entry", source=str(path))
    meta = json.loads(tensors.pop("meta").tobytes().decode())
    if meta.get("checkpoint_version") != checkpoint_version:
        raise FormatError(f"unsupported checkpoint version {meta.get('checkpoint_version')}",
                          source=str(path))

    model, optim = dict(), dict()
    for name, value in tensors.items():
        role, _, key = name.partition("/")
        if role == "model":
            model[key] = value
        elif role == "optim":
            optim[key] = value
        else:
            raise FormatError(f"unexpected checkpoint entry '{name}'", source=str(path))
    return Checkpoint(model, optim, meta)
