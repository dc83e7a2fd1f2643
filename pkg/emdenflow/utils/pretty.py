import enum

import numpy as np
import pydantic
from rich.markup import escape
from rich.tree import Tree

MAX_SEQUENCE_ITEMS = 6


def pretty_print_type(typ):
    typ_str = str(typ)
    if "'" in typ_str:  # for class wrapper
        typ_str = typ_str.split("'")[1]
    return escape(typ_str.replace("typing.", ""))


def _format_scalar(obj) -> str:
    if isinstance(obj, float):
        return f"{obj:.10g}"
    if isinstance(obj, enum.Enum):
        return str(obj.value)
    return repr(obj)


def describe(obj, t=None):
    """Render a report (pydantic model, dict, sequence or scalar) as a rich Tree."""
    if t is None:
        t = Tree(f"[bold]{escape(type(obj).__name__)}[/bold]")

    if isinstance(obj, pydantic.BaseModel):
        for field_name, field in type(obj).model_fields.items():
            sub_t = t.add(
                f"[deep_sky_blue1]{field_name}[/deep_sky_blue1] [dim]: "
                f"{pretty_print_type(field.annotation)}[/dim]"
            )
            describe(getattr(obj, field_name), t=sub_t)
    elif isinstance(obj, dict):
        if obj:
            for key, value in obj.items():
                sub_t = t.add(f"[deep_sky_blue1]{escape(str(key))}[/deep_sky_blue1]")
                describe(value, t=sub_t)
        else:
            t.label += " = [orange3]{}[/orange3]"
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        shown = ", ".join(_format_scalar(v) for v in items[:MAX_SEQUENCE_ITEMS])
        if len(items) > MAX_SEQUENCE_ITEMS:
            shown += f", ... ({len(items)} items)"
        t.label += f" = [orange3][{escape(shown)}][/orange3]"
    elif obj is None:
        t.label += " = [orange3]None[/orange3]"
    elif isinstance(obj, (str, int, float, bool, enum.Enum)):
        t.label += f" = [orange3]{escape(_format_scalar(obj))}[/orange3]"
    else:
        t.label += f" = [orange3]{escape(str(obj))}[/orange3]"
    return t
