from .plots import FigureSpec, PRESETS, SchemaError, UsageError, render, series

__all__ = ["FigureSpec", "PRESETS", "SchemaError", "UsageError", "render", "series"]
