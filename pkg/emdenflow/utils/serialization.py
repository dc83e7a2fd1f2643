import csv
import io
import json
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence

import click
import numpy as np
import pydantic


def safe_np_dump(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        return float(obj)
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    elif isinstance(obj, pydantic.BaseModel):
        return obj.model_dump(mode="json", by_alias=True)
    raise TypeError("Unexpected " + obj.__class__.__name__)


def format_cell(value: Any) -> str:
    """CSV cell: 17 significant digits for floats, empty for undefined values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return ""
        return format(float(value), ".17g")
    return str(value)


def _json_value(value: Any) -> Any:
    """Plain JSON values with every non-finite float, at any depth, as None."""
    if isinstance(value, pydantic.BaseModel):
        value = value.model_dump(mode="json", by_alias=True)
    elif isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def to_csv(columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buffer.getvalue()


def to_json(doc: Any) -> str:
    return (
        json.dumps(_json_value(doc), indent=2, default=safe_np_dump, allow_nan=False)
        + "\n"
    )


def render(
    columns: Sequence[str], rows: List[Dict[str, Any]], fmt: str = "csv"
) -> str:
    if fmt == "csv":
        return to_csv(columns, rows)
    return to_json([{c: row.get(c) for c in columns} for row in rows])


def write_output(text: str, output: Optional[str]) -> None:
    if output is None:
        click.echo(text, nl=False)
        return
    with open(output, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(text)
