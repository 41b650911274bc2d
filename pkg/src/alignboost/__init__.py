"""Monotone-constrained boosted trees, alignment auditing, model divergence,
and a randomized preference-elicitation experiment harness."""

from . import _kernels
from ._version import __version__


def kernel_backend() -> str:
    """Which kernel implementation is active: "compiled" or "python"."""
    return _kernels.backend_name()


__all__ = ["__version__", "kernel_backend"]
