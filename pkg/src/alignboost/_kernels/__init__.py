"""Hot-loop kernels: compiled extension when built, pure-Python fallback otherwise.

Set ``ALIGNBOOST_KERNELS=python`` or ``ALIGNBOOST_KERNELS=compiled`` to force a
backend. Both implement the same contract and produce identical trees; see
``benchmarks/bench_kernels.py`` for the speed comparison.
"""

from __future__ import annotations

import os

from . import pykernels

python_backend = pykernels

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built; pure-Python install
    compiled_backend = None

_forced = os.environ.get("ALIGNBOOST_KERNELS", "").strip().lower()
if _forced in ("python", "py"):
    active = python_backend
elif _forced in ("compiled", "cython", "c"):
    if compiled_backend is None:
        raise ImportError("ALIGNBOOST_KERNELS=compiled requested but the extension is not built")
    active = compiled_backend
elif _forced:
    raise ImportError(f"unknown ALIGNBOOST_KERNELS value {_forced!r}")
else:
    active = compiled_backend if compiled_backend is not None else python_backend


def backend_name() -> str:
    return "compiled" if (compiled_backend is not None and active is compiled_backend) else "python"
