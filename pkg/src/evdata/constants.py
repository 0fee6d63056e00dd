
# packed binary event files: 8-byte magic (the trailing digits are the format
# version), then u16 width and u16 height
evtmagic = b"EVTK0001"

# named tensor container (cache payloads and checkpoints)
tensormagic = 0x43545645  # "EVTC" read as a little-endian u32
tensorversion = 1

# labels are sampled at 100 Hz
label_period_us = 10_000

default_width = 640
default_height = 480

# the events of a recording must reach this close to both ends of its labels
coverage_gap_us = 100_000
