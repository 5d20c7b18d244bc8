"""Renderers for hexwave output files.

Reads only the documented HGR/CSV/manifest formats; no in-process coupling
to the solver package, so either side can be rebuilt independently.
"""

__version__ = "0.1.0"
