"""evfleet - column generation and QUBO master solvers for EV fleet charging and allocation."""

__version__ = "1.0.0"
__author__ = "evfleet Team"
