"""Low-rank phase retrieval by anchored regression.

Simulate phaseless quadratic measurements of low-rank matrices, build
anchors by partial-trace spectral initialization, and recover the matrix
with the nuclear-norm regularized anchored-regression program.
"""

__version__ = "0.1.0"
