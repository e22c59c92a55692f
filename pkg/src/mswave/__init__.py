"""Multiscale wave equation toolkit.

Fine-scale FEM reference solvers, periodic homogenization, FE-HMM and
FD-HMM upscaling, localized orthogonal decomposition, and long-time
dispersive effective models, with a benchmark harness on top.
"""

__version__ = "0.1.0"
