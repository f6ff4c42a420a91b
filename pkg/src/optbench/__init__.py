"""Benchmarking harness for optimization solvers.

Runs instrumented reference solvers over test sets under fixed-target or
fixed-cost protocols and computes accuracy measures, constraint-violation
aggregates, performance/data/accuracy profiles and competitive tables.
"""

__version__ = "0.1.0"
