"""
Base command class and shared argument handling for all CLI commands
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from ..models.params import ModelParams
from ..models.results import ResultRecord
from ..utils.config import ConfigManager, LoadedConfig, default_workers
from ..utils.file_manager import FileManager

MODEL_FLAGS = {
    'E': 'External pump amplitude',
    'delta0': 'Pump detuning',
    'delta1': 'Signal detuning',
    'M0': 'Pump detuning modulation',
    'M1': 'Signal detuning modulation',
    'kp': 'Photonic crystal wavenumber',
}


class BaseCommand(ABC):
    """Abstract base class for all CLI commands"""

    name = ''
    help = ''

    @abstractmethod
    def add_parser(self, subparsers):
        """Add command parser to subparsers"""
        pass

    @abstractmethod
    def execute(self, args, config_manager: ConfigManager, console: Console) -> None:
        """Execute the command"""
        pass

    def show_detailed_help(self, console: Console):
        """Show detailed help for this command"""
        console.print(f"[bold cyan]{self.name}[/bold cyan]: {self.help}")


def add_model_arguments(parser, relative: bool = True) -> None:
    """--E, --delta0, ... overriding the model section of the config"""
    group = parser.add_argument_group('model parameters')
    for name, text in MODEL_FLAGS.items():
        group.add_argument(f'--{name}', type=float, default=None, help=text)
    if relative:
        group.add_argument('--E-relative', dest='E_relative', type=float, default=None,
                           help='Pump as a fraction of the threshold (overrides --E)')


def add_output_arguments(parser) -> None:
    parser.add_argument('--output', '-o', help='Write results to a .csv or .json file')


def add_worker_argument(parser) -> None:
    parser.add_argument('--workers', type=int, default=None,
                        help='Worker threads (default: PCOPO_WORKERS or 1)')


def model_overrides(args) -> Dict[str, Any]:
    overrides = {f'model.{name}': getattr(args, name, None) for name in MODEL_FLAGS}
    overrides['model.E_relative'] = getattr(args, 'E_relative', None)
    return overrides


def load_records(args, config_manager: ConfigManager, extra: Optional[Dict[str, Any]] = None) -> LoadedConfig:
    """Apply command-line overrides to the configuration and validate it"""
    config_manager.update(model_overrides(args))
    if extra:
        config_manager.update(extra)
    return config_manager.build()


def resolve_workers(args) -> int:
    workers = getattr(args, 'workers', None)
    return workers if workers else default_workers()


def format_number(value: float, digits: int) -> str:
    return format(value, f'.{digits}g')


def print_values(console: Console, title: str, values: Dict[str, Any], digits: int = 10) -> None:
    """Two-column table of named results"""
    table = Table(title=title)
    table.add_column("Quantity", style="cyan", no_wrap=True)
    table.add_column("Value", style="white")
    for key, value in values.items():
        if isinstance(value, complex):
            text = f"{format_number(value.real, digits)} {'+' if value.imag >= 0 else '-'} {format_number(abs(value.imag), digits)}i"
        elif isinstance(value, float):
            text = format_number(value, digits)
        else:
            text = str(value)
        table.add_row(key, text)
    console.print(table)


def print_params(console: Console, params: ModelParams) -> None:
    values = ", ".join(f"{key}={format_number(value, 8)}" for key, value in params.snapshot().items())
    console.print(f"[dim]{values}[/dim]", highlight=False)


def write_records(path: Optional[str], records: Sequence[ResultRecord], metadata: Dict[str, Any],
                  console: Console) -> None:
    if not path:
        return
    written = FileManager().write_results(path, records, metadata)
    console.print(f"[green]✓ Wrote {len(records)} record(s) to {written}[/green]")


def record_table(console: Console, title: str, records: List[ResultRecord], limit: int = 40) -> None:
    """Rows of a record list; long lists are elided"""
    if not records:
        console.print("[yellow]No records[/yellow]")
        return
    columns: List[str] = []
    for record in records:
        for key in record.values:
            if key not in columns:
                columns.append(key)
    table = Table(title=title)
    for column in columns:
        table.add_column(column, style="white")
    table.add_column("above threshold", style="yellow")
    shown = records if len(records) <= limit else records[:limit // 2] + records[-limit // 2:]
    for record in shown:
        cells = []
        for column in columns:
            value = record.values.get(column)
            cells.append(format_number(value, 8) if isinstance(value, float) else "" if value is None else str(value))
        cells.append("yes" if record.above_threshold else "")
        table.add_row(*cells)
    console.print(table)
    if len(shown) < len(records):
        console.print(f"[dim]{len(records) - len(shown)} row(s) elided; use --output for the full set[/dim]")
