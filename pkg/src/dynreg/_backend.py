"""Select the compiled Haar kernels when available, else the pure-Python ones.

Set ``DYNREG_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

COMPILED_AVAILABLE = _compiled is not None

if COMPILED_AVAILABLE and not os.environ.get("DYNREG_PURE_PYTHON"):
    kernels = _compiled
    BACKEND = "compiled"
else:
    kernels = _fallback
    BACKEND = "python"


def get_backend(name=None):
    """Return the kernel module for ``"compiled"``, ``"python"`` or the default."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available():
    return ("python", "compiled") if COMPILED_AVAILABLE else ("python",)
