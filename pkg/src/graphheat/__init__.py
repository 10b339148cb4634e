"""Heat equations on weighted graphs: solvers, maximum principles and barrier certificates."""

__version__ = "0.1.0"
