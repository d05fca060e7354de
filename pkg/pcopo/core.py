"""
Core CLI application class and main command router
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .commands import (
    DuanCommand,
    IntensityCommand,
    MatrixCheckCommand,
    ReidCommand,
    ReproduceFigureCommand,
    SimulateCommand,
    SpectrumCommand,
    SqueezeCommand,
    SteadyCommand,
    SweepCommand,
    ThresholdCommand,
    TwinCommand,
)
from .errors import ConfigError, PcopoError
from .utils.config import ConfigManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2


def apply_logging_config(section) -> None:
    """Level, optional log file and format from the logging section"""
    root = logging.getLogger()
    level = str(section.get('level') or 'INFO').upper()
    root.setLevel(getattr(logging, level, logging.INFO))
    formatter = logging.Formatter(section.get('format') or '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    for handler in root.handlers:
        handler.setFormatter(formatter)
    log_file = section.get('file')
    if log_file and not any(getattr(h, 'baseFilename', None) == str(Path(log_file).resolve()) for h in root.handlers):
        handler = logging.FileHandler(log_file)
        handler.setFormatter(formatter)
        root.addHandler(handler)


class PcopoCLI:
    """Main CLI application class"""

    def __init__(self, console: Optional[Console] = None, error_console: Optional[Console] = None):
        self.console = console or Console()
        self.error_console = error_console or Console(stderr=True)
        self.config_manager = ConfigManager()
        self.commands = {
            command.name: command
            for command in (
                SteadyCommand(),
                MatrixCheckCommand(),
                SpectrumCommand(),
                IntensityCommand(),
                ThresholdCommand(),
                SqueezeCommand(),
                DuanCommand(),
                ReidCommand(),
                TwinCommand(),
                SimulateCommand(),
                SweepCommand(),
                ReproduceFigureCommand(),
            )
        }

    def create_parser(self) -> argparse.ArgumentParser:
        """Create the argument parser with all commands"""
        parser = argparse.ArgumentParser(
            description="PCOPO workbench - below-threshold quantum correlations of an OPO with a photonic crystal",
            prog="pcopo"
        )

        parser.add_argument(
            '--version',
            action='version',
            version=f'pcopo-workbench v{__version__}'
        )

        parser.add_argument(
            '--config',
            help='Path to configuration file (defaults apply when omitted)',
            default=None
        )

        subparsers = parser.add_subparsers(dest='command', help='Available commands')
        for command in self.commands.values():
            command.add_parser(subparsers)

        help_parser = subparsers.add_parser('help', help='Show detailed help')
        help_parser.add_argument('topic', nargs='?', help='Help topic')
        return parser

    def show_welcome(self):
        """Display the command overview"""
        self.console.print(Panel.fit(
            "[bold magenta]PCOPO workbench[/bold magenta]\n"
            "Linearized quantum correlations and stochastic field simulation\n"
            "[dim]Optical parametric oscillator with a modulated intracavity photonic crystal[/dim]",
            title=f"pcopo v{__version__}",
            border_style="cyan"
        ))
        table = Table(title="Available Commands")
        table.add_column("Command", style="cyan", no_wrap=True)
        table.add_column("Description", style="white")
        for name, command in self.commands.items():
            table.add_row(name, command.help)
        self.console.print(table)
        self.console.print("\n[dim]Use 'pcopo <command> --help' for detailed command help[/dim]")

    def show_help(self, topic: Optional[str] = None):
        """Show detailed help information"""
        if topic and topic in self.commands:
            self.commands[topic].show_detailed_help(self.console)
        else:
            self.show_welcome()

    def load_config(self, path: Optional[str]) -> None:
        if path is None:
            default = Path("config/config.yaml")
            if not default.exists():
                return
            path = str(default)
        self.config_manager.load_config(path)
        apply_logging_config(self.config_manager.get_section('logging'))

    def report_error(self, error: Exception) -> None:
        kind = type(error).__name__
        self.error_console.print(f"[red]{kind}: {escape(str(error))}[/red]", highlight=False)

    def run(self, argv: Optional[List[str]] = None) -> int:
        """
        Parse arguments and run one command

        Returns:
            int: Process exit status (0 success, 2 usage, 3 validation, 4 numerical failure)
        """
        parser = self.create_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE

        if args.command == 'help':
            self.show_help(args.topic)
            return EXIT_OK
        if not args.command:
            self.show_welcome()
            return EXIT_OK

        try:
            self.load_config(args.config)
            self.commands[args.command].execute(args, self.config_manager, self.console)
        except PcopoError as e:
            logger.debug(f"Command {args.command} failed", exc_info=True)
            self.report_error(e)
            return e.exit_code
        except ValueError as e:
            self.report_error(e)
            return ConfigError.exit_code
        return EXIT_OK
