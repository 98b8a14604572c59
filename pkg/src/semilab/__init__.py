r"""Numerical laboratory for quasicontractive semigroups of coupled elliptic systems.

The package is organised around one pipeline:

    expressions / coefficients  ->  hypotheses  ->  pinterval
                                 \->  discrete  ->  evolution -> heatkernel
                                                \->  metric

with ``scenario`` + ``gallery`` + ``cli`` providing the runnable surface.
"""

__version__ = "0.1.0"
