"""Figure rendering for sausage-lab sweep output."""

from .sweep import (
    SCHEMA_COLUMNS,
    SchemaError,
    SweepTable,
    main,
    prepare_arrays,
    read_sweep_csv,
    render_sweep,
)

__all__ = [
    "SCHEMA_COLUMNS",
    "SchemaError",
    "SweepTable",
    "main",
    "prepare_arrays",
    "read_sweep_csv",
    "render_sweep",
]
