"""Backend selection for the hot loops.

The compiled extension ``lrom._kernels`` is used when importable; otherwise
the NumPy fallback in ``lrom._kernels_py`` is used. Setting the environment
variable ``LROM_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("LROM_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

cut_rules = _impl.cut_rules
element_integrals = _impl.element_integrals
fnv1a64_pairs = _impl.fnv1a64_pairs

__all__ = ["BACKEND", "cut_rules", "element_integrals", "fnv1a64_pairs"]
