#!/usr/bin/env python3

import click
import logging
from pathlib import Path

from .evfile import BinaryEventReader
from .evlogging import setup_logging, EventDump
from .factory import make_reader


@click.command()
@click.argument('source', type=click.Path(exists=True, dir_okay=False))
@click.option('-o', '--loglevel', default=logging.INFO)
@click.option('-s', '--suppress', multiple=True,
              help="silence a dump channel: hdr, ev, lbl or blink")
@click.option('-k', '--skip', default=0, help="records to skip")
@click.option('-n', '--count', default=None, type=int, help="records to show")
@click.option('-W', '--width', default=640)
@click.option('-H', '--height', default=480)
def evdump(source, loglevel, suppress, skip, count, width, height):
    """Dump an event (.evt, .csv, .txt) or label (.labels) file record by record."""

    # The handler terminates the programme when a pipe into less terminates.
    setup_logging(loglevel)

    dump = EventDump()
    for channel in ("hdr", "ev", "lbl", "blink"):
        level = logging.WARNING if channel in suppress else logging.NOTSET
        dump.logger.getChild(channel).setLevel(level)

    reader = make_reader(source, (width, height))

    if Path(source).suffix == ".labels":
        dump.labels(reader.read(), skip, count)
        return

    if isinstance(reader, BinaryEventReader):
        dump.header(reader.header())
    dump.events(reader.read(), skip, count)
