from .base import FormatError
from .bitstruct import BitStruct
from .constants import evtmagic, tensormagic, tensorversion


class BaseHeader:
    header_size = 0

    def __init__(self, data, addr=0, source=None):
        if not isinstance(data, bytes) or len(data) != self.header_size:
            raise FormatError(
                f"truncated {type(self).__name__}: {len(data)} of "
                f"{self.header_size} bytes", source=source, offset=addr)

        self._addr = addr
        self._data = data
        for k, v in zip(self.keys(), self.unpack(data)):
            setattr(self,k,v)

    @classmethod
    def read(cls, stream, source=None):
        addr = stream.tell()
        data = stream.read(cls.header_size)
        return cls(data, addr, source)

    @classmethod
    def build(cls, **fields):
        return cls(cls.pack(*(fields[k] for k in cls.keys())))

    def tobytes(self):
        return self._data

    def fields(self):
        return {k: getattr(self, k) for k in self.keys()}

    def dump(self, logger):
        """Log one line per header field, with address and raw value."""
        for k, v in self.fields().items():
            logger.info(f"{k:<10} {v}", extra=dict(evaddr=self._addr, evdata=v))

    # @BitStruct replaces these three with the field layout
    @classmethod
    def keys(cls):
        raise NotImplementedError(f"{cls.__name__} has no @BitStruct layout")

    @classmethod
    def unpack(cls, data):
        cls.keys()

    @classmethod
    def pack(cls, *values):
        cls.keys()


@BitStruct(magic=64, width=16, height=16)
class EventFileHeader(BaseHeader):
    """Header of a packed binary event file.

    The magic is read as a little-endian u64 so that the file starts with the
    ASCII bytes of `evtmagic`."""

    magic_value = int.from_bytes(evtmagic, "little")

    def __init__(self, data, addr=0, source=None):
        super().__init__(data, addr, source)
        if self.magic != self.magic_value:
            found = self.magic.to_bytes(8, "little")
            raise FormatError(f"invalid magic {found!r}, expected {evtmagic!r}",
                              source=source, offset=addr)

    @classmethod
    def for_geometry(cls, geometry):
        return cls.build(magic=cls.magic_value, width=geometry.width,
                         height=geometry.height)


@BitStruct(magic=32, version=16, count=16)
class TensorMapHeader(BaseHeader):

    def __init__(self, data, addr=0, source=None):
        super().__init__(data, addr, source)
        if self.magic != tensormagic:
            raise FormatError(f"invalid tensor map magic 0x{self.magic:08X}",
                              source=source, offset=addr)
        if self.version != tensorversion:
            raise FormatError(f"unsupported tensor map version {self.version}",
                              source=source, offset=addr)


# dtype code and rank share one byte
@BitStruct(namelen=16, dtype=4, ndim=4, reserved=8, nbytes=64)
class TensorEntryHeader(BaseHeader):
    pass


