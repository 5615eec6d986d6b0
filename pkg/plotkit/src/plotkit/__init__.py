"""Learning-curve figures from training-metrics CSVs."""

from .aggregate import CurveGroup, aggregate
from .render import render

__all__ = ["CurveGroup", "aggregate", "render"]

__version__ = "0.1.0"
