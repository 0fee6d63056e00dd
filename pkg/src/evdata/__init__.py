
from .base import EvtkError, FormatError, StreamOrderError
from .base import Event, EventStream, LabelSample, LabelTrack, RecordingBundle
from .base import SensorGeometry, Violation, validate_stream, validate_bundle
from .evdump import evdump as evdump
from .evfile import read_events, write_events, read_labels, write_labels
from .evfile import read_bundle, write_bundle
from .factory import make_reader
