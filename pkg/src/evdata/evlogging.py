import logging
import sys

from termcolor import colored


class StdoutHandler(logging.StreamHandler):

    def __init__(self):
        super().__init__(sys.stdout)
        self.setFormatter(ColorFormatter())

    def handleError(self, record):
        t, v, tb = sys.exc_info()
        if t == BrokenPipeError:
            # the pager on the other end of the pipe is gone: stop quietly
            raise SystemExit(0)

        else:
            super().handleError(record)


class ColorFormatter(logging.Formatter):
    """Colour by level; records with `evaddr`/`evdata` extras use the dump layout"""

    level_colors = {
        logging.DEBUG: "dark_grey",
        logging.INFO: None,
        logging.WARNING: "yellow",
        logging.ERROR: "red",
        logging.CRITICAL: "red",
    }

    def __init__(self, default_format=None, dump_format=None):
        super().__init__(default_format)

        if default_format is None:
            default_format = "%(shortname)-8s %(message)s"
        if dump_format is None:
            dump_format = "%(evaddr)12d  %(evdata)-24s  %(message)s"

        self.formatter_dump = logging.Formatter(dump_format)
        self.formatter_default = logging.Formatter(default_format)

    def format(self, record):
        record.shortname = record.name.split(".")[-1]

        if hasattr(record, 'evdata'):
            text = self.formatter_dump.format(record)
        else:
            text = self.formatter_default.format(record)

        color = getattr(record, 'color', None) or self.level_colors.get(record.levelno)
        if color is None:
            return text
        attrs = ["bold"] if record.levelno >= logging.CRITICAL else None
        return colored(text, color, attrs=attrs)


class TermColorFilter(logging.Filter):
    """Attach a fixed colour to every record passing through a logger"""

    def __init__(self, color):
        super().__init__()
        self.color = color

    def filter(self, record):
        if not hasattr(record, 'color'):
            record.color = self.color
        return True


def setup_logging(loglevel=logging.INFO):
    logging.basicConfig(level=loglevel, handlers=[StdoutHandler()], force=True)


class EventDump:
    """Render event and label records through the dump layout of ColorFormatter"""

    def __init__(self, logger_name="evdata.dump"):
        self.logger = logging.getLogger(logger_name)
        self.logger.getChild("hdr").addFilter(TermColorFilter("cyan"))
        self.logger.getChild("blink").addFilter(TermColorFilter("magenta"))

    def header(self, header):
        header.dump(self.logger.getChild("hdr"))

    def events(self, stream, first=0, count=None):
        stop = len(stream) if count is None else min(len(stream), first + count)
        for i in range(first, stop):
            e = stream[i]
            pol = "+" if e.p > 0 else "-"
            self.logger.getChild("ev").info(
                f"x={e.x:4d} y={e.y:4d} {pol}",
                extra=dict(evaddr=i, evdata=f"t={e.t}us"))

    def labels(self, track, first=0, count=None):
        stop = len(track) if count is None else min(len(track), first + count)
        times = track.times()
        for i in range(first, stop):
            s = track[i]
            child = "blink" if s.close else "lbl"
            self.logger.getChild(child).info(
                f"x={s.x:8.2f} y={s.y:8.2f} close={s.close}",
                extra=dict(evaddr=i, evdata=f"t={times[i]}us"))
