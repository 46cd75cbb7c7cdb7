import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config import settings
from errors import StorageError
from logger import log_error, log_info
from models import SweepRow

SWEEP_COLUMNS = ["eta", "nbar_b", "n_modes", "mean_ns", "var_ns", "x0", "y0", "cq_star", "mse_lower"]

GOLDEN_SWEEP = "ecs_sweep.csv"
GOLDEN_BOUND = "bound_example.json"
GOLDEN_ORACLE = "oracle_coherent.json"


def format_number(value: Union[str, int, float]) -> str:
    """12 significant digits; infinities as "inf" and no negative zero"""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = f"{value:.12g}"
    return "0" if text == "-0" else text


def json_value(value: Any) -> Any:
    """Round floats to 12 significant digits, leaving non-finite values as strings"""
    if isinstance(value, bool) or not isinstance(value, float):
        if isinstance(value, dict):
            return {key: json_value(item) for key, item in value.items()}
        if isinstance(value, (list, tuple)):
            return [json_value(item) for item in value]
        return value
    text = format_number(value)
    return text if not math.isfinite(value) else float(text)


class ResultStorageService:
    """Service for rendering results and managing golden files"""

    def __init__(self, golden_path: Optional[str] = None):
        self.golden_path = golden_path or settings.golden_path

    def render_json(self, payload: Any) -> str:
        return json.dumps(json_value(payload), indent=2) + "\n"

    def render_table(self, columns: List[str], records: List[Dict[str, Any]]) -> str:
        lines = [",".join(columns)]
        for record in records:
            lines.append(",".join(format_number(record[column]) for column in columns))
        return "\n".join(lines) + "\n"

    def render_csv(self, rows: List[SweepRow]) -> str:
        return self.render_table(SWEEP_COLUMNS, [row.model_dump() for row in rows])

    def write_text(self, text: str, output_path: Optional[str] = None) -> Optional[str]:
        """Write to output_path, or to stdout when no path is given"""
        if not output_path:
            sys.stdout.write(text)
            return None

        try:
            path = Path(output_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as f:
                f.write(text)
            log_info(f"Results written to {path}")
            return str(path)
        except OSError as e:
            log_error(f"Error writing results to {output_path}", error=e)
            raise StorageError(f"Cannot write {output_path}: {e}") from e

    def golden_file(self, name: str) -> Path:
        return Path(self.golden_path) / name

    def load_golden_text(self, name: str) -> str:
        path = self.golden_file(name)
        if not path.is_file():
            raise StorageError(f"Golden file not found: {path}")
        return path.read_text()

    def load_golden_csv(self, name: str = GOLDEN_SWEEP) -> List[Dict[str, str]]:
        return list(csv.DictReader(io.StringIO(self.load_golden_text(name))))

    def load_golden_json(self, name: str) -> Dict[str, Any]:
        try:
            return json.loads(self.load_golden_text(name))
        except json.JSONDecodeError as e:
            raise StorageError(f"Golden file {name} is not valid JSON: {e}") from e

    def save_golden(self, name: str, text: str, confirmed: bool = False) -> str:
        """Overwrite a golden file; refused unless the caller confirmed it"""
        if not confirmed:
            raise StorageError("Refusing to regenerate golden files without --i-know")
        log_info(f"Regenerating golden file {name}")
        return self.write_text(text, str(self.golden_file(name)))
