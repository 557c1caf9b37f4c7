"""Hot simulation kernels: compiled extension if available, else pure Python.

Set ``TPPATTACK_PURE_KERNELS=1`` to force the fallback (used by the
benchmark to compare both implementations in one process).
"""
import os

from . import _hawkes_py

if os.environ.get("TPPATTACK_PURE_KERNELS") == "1":
    HAS_COMPILED = False
    thinning = _hawkes_py.thinning
else:
    try:
        from . import _hawkes_c

        HAS_COMPILED = True
        thinning = _hawkes_c.thinning
    except ImportError:
        HAS_COMPILED = False
        thinning = _hawkes_py.thinning

thinning_py = _hawkes_py.thinning

__all__ = ["thinning", "thinning_py", "HAS_COMPILED"]
