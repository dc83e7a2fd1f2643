# flake8: noqa: F401
from emdenflow.testing.reference import (
    ReferenceCsv,
    ReferenceJson,
    ReferenceText,
    click_invoke,
    deep_format_floats,
)
