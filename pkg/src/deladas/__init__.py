"""Constraint-based deployment engine with an autonomic manager.

Administrators declare component types, hosts and a constraint goal in the
Deladas language; the engine solves for a valid placement and wiring, deploys
it onto a simulated host fabric, and re-solves with minimal disruption when
processes or hosts fail.
"""

__version__ = "0.1.0"

from .lang import parse, pretty_print, tokenize  # noqa: F401
