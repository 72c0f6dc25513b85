"""Offline figure rendering for ldrl CLI outputs (CSV in, image out)."""

from .figures import FigureSpec, SchemaError, render

__version__ = "0.1.0"
