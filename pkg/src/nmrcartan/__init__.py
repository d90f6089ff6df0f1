"""Time-optimal two-qubit NMR gate synthesis, pulse compilation and simulation."""

__version__ = "0.1.0"
