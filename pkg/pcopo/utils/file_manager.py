"""
File management and result export for the PCOPO workbench
"""

import csv
import io
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..models.results import ResultRecord

logger = logging.getLogger(__name__)

RESULT_SCHEMA = "pcopo.result/1"
PARAM_COLUMNS = ("E", "delta0", "delta1", "M0", "M1", "kp")
FLOAT_FORMAT = ".17g"


def format_value(value: Any) -> str:
    """Round-trip text form of a CSV cell"""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    if value is None:
        return ""
    return str(value)


def parse_value(text: str) -> Any:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


class FileManager:
    """Handles file operations for the workbench"""

    def __init__(self, base_path: Optional[str] = None):
        """
        Initialize the file manager

        Args:
            base_path: Base directory for file operations (defaults to current directory)
        """
        self.base_path = Path(base_path) if base_path else Path.cwd()

    def resolve(self, file_path: str) -> Path:
        path = Path(file_path)
        return path if path.is_absolute() else self.base_path / path

    def ensure_directory(self, path: Path) -> None:
        """
        Ensure directory exists, create if it doesn't

        Args:
            path: Directory path to ensure
        """
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"Failed to create directory {path}: {e}")
            raise

    def read_file(self, file_path: str) -> str:
        """
        Read content from a file

        Raises:
            FileNotFoundError: If file doesn't exist
        """
        path = self.resolve(file_path)
        if not path.exists():
            raise FileNotFoundError(f"File not found: {path}")
        return path.read_text(encoding='utf-8')

    def write_file(self, file_path: str, content: str, encoding: str = 'utf-8') -> Path:
        """
        Write content atomically through a temporary file

        Args:
            file_path: Path to the file to write
            content: Content to write
            encoding: File encoding (default: utf-8)

        Returns:
            Path: The written file
        """
        path = self.resolve(file_path)
        self.ensure_directory(path.parent)
        temp_path = path.with_suffix(path.suffix + '.tmp')
        try:
            with open(temp_path, 'w', encoding=encoding, newline='') as f:
                f.write(content)
                f.flush()
                os.fsync(f.fileno())
            temp_path.replace(path)
        except Exception as e:
            logger.error(f"Failed to write file {path}: {e}")
            if temp_path.exists():
                temp_path.unlink()
            raise
        logger.info(f"Wrote {path} ({len(content)} characters)")
        return path

    def write_json(self, file_path: str, data: Dict[str, Any], indent: int = 2) -> Path:
        return self.write_file(file_path, json.dumps(data, indent=indent) + "\n")

    def write_results(self, file_path: str, records: Sequence[ResultRecord], metadata: Dict[str, Any]) -> Path:
        """Write records as CSV or JSON depending on the file suffix"""
        if Path(file_path).suffix.lower() == ".json":
            return self.write_json(file_path, results_to_json(records, metadata))
        return self.write_file(file_path, results_to_csv(records, metadata))

    def read_results(self, file_path: str) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
        """
        Read a result file back

        Returns:
            (metadata, rows): rows are flat dictionaries for CSV, record dictionaries for JSON
        """
        text = self.read_file(file_path)
        if Path(file_path).suffix.lower() == ".json":
            data = json.loads(text)
            if data.get("schema") != RESULT_SCHEMA:
                raise ValueError(f"unsupported result schema {data.get('schema')!r}")
            return data.get("metadata", {}), data.get("records", [])
        return parse_csv(text)


def _columns(records: Sequence[ResultRecord]) -> Tuple[List[str], List[str], List[str]]:
    params, values, errors = list(PARAM_COLUMNS), [], []
    for record in records:
        for key in record.params:
            if key not in params:
                params.append(key)
        for key in record.values:
            if key not in values:
                values.append(key)
        for key in record.error_bars:
            if key not in errors:
                errors.append(key)
    return params, values, errors


def results_to_csv(records: Sequence[ResultRecord], metadata: Dict[str, Any]) -> str:
    """CSV text: '#' metadata block, one header line, one row per record"""
    lines = [f"# schema: {RESULT_SCHEMA}"]
    for key, value in metadata.items():
        lines.append(f"# {key}: {json.dumps(value, sort_keys=True)}")

    params, values, errors = _columns(records)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(params + values + [f"err_{name}" for name in errors] + ["above_threshold"])
    for record in records:
        row = [record.params.get(name) for name in params]
        row += [record.values.get(name) for name in values]
        row += [record.error_bars.get(name) for name in errors]
        row.append(record.above_threshold)
        writer.writerow([format_value(cell) for cell in row])
    return "\n".join(lines) + "\n" + buffer.getvalue()


def parse_csv(text: str) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    """Inverse of results_to_csv for the metadata block and the rows"""
    metadata: Dict[str, Any] = {}
    body: List[str] = []
    for line in text.splitlines():
        if line.startswith("#") and not body:
            key, _, value = line[1:].strip().partition(": ")
            metadata[key] = value if key == "schema" else json.loads(value)
        elif line:
            body.append(line)

    reader = csv.reader(body)
    header = next(reader, None)
    if header is None:
        return metadata, []
    rows = [{name: parse_value(cell) for name, cell in zip(header, cells)} for cells in reader]
    return metadata, rows


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_json_safe(item) for item in value]
    return value


def results_to_json(records: Sequence[ResultRecord], metadata: Dict[str, Any]) -> Dict[str, Any]:
    """Schema-versioned JSON document; non-finite numbers become null"""
    return {
        "schema": RESULT_SCHEMA,
        "metadata": _json_safe(metadata),
        "records": [_json_safe(record.to_dict()) for record in records],
    }


def gnuplot_script(data_file: str, x: str, y: str, z: Optional[str] = None,
                   group: Optional[str] = None, title: str = "") -> str:
    """
    Plot script for a result CSV

    Args:
        data_file: CSV written by results_to_csv
        x, y: Column names of the axes
        z: Column for a colour map (x, y, z image plot)
        group: Column whose distinct values become separate curves
        title: Plot title
    """
    lines = [
        f"# gnuplot script for {data_file}",
        'set datafile separator ","',
        "set datafile commentschars \"#\"",
        f'set title "{title}"',
        f'set xlabel "{x}"',
        f'set ylabel "{y}"',
    ]
    if z is not None:
        lines += [
            f'set cblabel "{z}"',
            "set view map",
            f'splot "{data_file}" using "{x}":"{y}":"{z}" with points palette pointtype 5 pointsize 0.5 notitle',
        ]
    elif group is not None:
        lines += [
            f'set cblabel "{group}"',
            f'plot "{data_file}" using "{x}":"{y}":"{group}" with linespoints palette pointtype 7 notitle',
        ]
    else:
        lines.append(f'plot "{data_file}" using "{x}":"{y}" with lines notitle')
    lines.append("pause -1")
    return "\n".join(lines) + "\n"
