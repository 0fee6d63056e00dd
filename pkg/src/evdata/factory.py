from pathlib import Path

from .base import SensorGeometry
from .evfile import TextEventReader, BinaryEventReader, LabelReader


def make_reader(source, geometry=SensorGeometry()):

    # Instantiate the reader matching the file type of the source
    suffix = Path(str(source)).suffix

    if suffix == ".evt":
        return BinaryEventReader(source)

    elif suffix in (".csv", ".txt"):
        return TextEventReader(source, geometry)

    elif suffix == ".labels":
        return LabelReader(source)

    else:
        raise ValueError(f"unknown source type: {source}")
