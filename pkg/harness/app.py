# -*- coding: utf-8 -*-
"""
Command-line application: parser, logging setup and dispatch.
"""
import argparse
import logging

from harness.commands import COMMANDS

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


def configure_logging(verbosity=0):
    """Single stream handler; verbosity > 0 is DEBUG, 0 INFO, < 0 WARNING."""
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    return level


class GroupSlabApp:
    def __init__(self):
        self.parser = self.create_parser()

    def create_parser(self):
        parser = argparse.ArgumentParser(
            prog='main.py',
            description='Bayesian group-sparse multivariate regression: sampler, '
                        'limiting mixture posterior and simulation experiments.',
            )
        parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
        parser.add_argument('-q', '--quiet', action='store_true', help='warnings and errors only')
        subparsers = parser.add_subparsers(dest='subcommand', metavar='subcommand')
        subparsers.required = True
        self.commands = [command(subparsers) for command in COMMANDS]
        return parser

    def run(self, argv=None):
        """Parse argv and run the subcommand; returns the process exit status."""
        args = self.parser.parse_args(argv)
        configure_logging(int(args.verbose) - int(args.quiet))
        try:
            args.command.run(args)
        except Exception as error:
            logger.error('%s failed: %s', args.subcommand, error)
            logger.debug('traceback', exc_info=True)
            return 1
        return 0
