"""Packed binary records with fields that need not be byte aligned.

`BitStruct(name=bits, ...)` lays out the fields in declaration order. A field
of 8, 16, 32 or 64 bits that starts on a word boundary becomes one struct item;
runs of narrower fields are gathered into one little-endian word, first field
in the most significant bits.
"""

import struct
from typing import NamedTuple

word_codes = {8: "B", 16: "H", 32: "L", 64: "Q"}


class BitField(NamedTuple):
    name: str
    shift: int
    mask: int


class Word(NamedTuple):
    """One struct item and the bit fields it carries"""
    code: str
    fields: tuple

    def decode(self, word):
        return [(word >> f.shift) & f.mask for f in self.fields]

    def encode(self, values):
        word = 0
        for f, v in zip(self.fields, values):
            if v < 0 or v > f.mask:
                raise ValueError(f"{f.name}: value {v} does not fit into "
                                 f"{f.mask.bit_length()} bits")
            word |= v << f.shift
        return word


def layout(fields):
    """Group (name, bits) pairs into struct words."""

    words, pending, width = list(), list(), 0
    for name, bits in fields:
        if bits < 1:
            raise ValueError(f"{name}: field width must be positive, got {bits}")

        if not pending and bits in word_codes:
            words.append(Word(word_codes[bits], (BitField(name, 0, (1 << bits) - 1),)))
            continue

        pending.append((name, bits))
        width += bits
        if width in word_codes:
            shift, group = width, list()
            for n, b in pending:
                shift -= b
                group.append(BitField(n, shift, (1 << b) - 1))
            words.append(Word(word_codes[width], tuple(group)))
            pending, width = list(), 0
        elif width > 64:
            raise ValueError(f"bit fields {[n for n, _ in pending]} straddle a 64-bit word")

    if pending:
        raise ValueError("bit fields do not add up to a full word")
    return tuple(words)


class BitStruct:
    """Layout of a packed record; also a class decorator for header classes.

    The decorated class gets `unpack`, `pack`, `keys` and `header_size`.
    """

    def __init__(self, **fields):
        self.words = layout(fields.items())
        self.format = "<" + "".join(w.code for w in self.words)
        self.size = struct.calcsize(self.format)
        self._keys = tuple(f.name for w in self.words for f in w.fields)

    def __call__(self, klass):
        klass.unpack = self.unpack
        klass.pack = self.pack
        klass.keys = self.keys
        klass.header_size = self.size
        return klass

    def keys(self):
        return self._keys

    def unpack(self, data):
        values = list()
        for w, item in zip(self.words, struct.unpack(self.format, data)):
            values.extend(w.decode(item))
        return tuple(values)

    def pack(self, *values):
        if len(values) != len(self._keys):
            raise ValueError(f"expected {len(self._keys)} values, got {len(values)}")
        items, pos = list(), 0
        for w in self.words:
            n = len(w.fields)
            items.append(w.encode(values[pos:pos + n]))
            pos += n
        return struct.pack(self.format, *items)
