"""Backend selection for the quadrature kernels.

The compiled extension ``fracpont._kernels`` is used when it was built;
otherwise the numpy implementation in ``fracpont._kernels_py`` is used.
Setting ``FRACPONT_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("FRACPONT_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
lower_apply = (_compiled or _kernels_py).lower_apply

__all__ = ["BACKEND", "lower_apply"]
