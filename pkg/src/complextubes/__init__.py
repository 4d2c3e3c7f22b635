"""Complex tube incidence geometry and a Falconer distance-set laboratory."""

__version__ = "0.1.0"
