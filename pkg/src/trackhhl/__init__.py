"""Track reconstruction by linear-system minimisation, with classical and
simulated HHL solvers and primary-vertex post-processing."""

__version__ = "0.1.0"
