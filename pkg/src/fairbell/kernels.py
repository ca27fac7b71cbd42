"""Hot kernels, compiled when available.

The Cython extension ``fairbell._kernels`` is used if it was built;
otherwise the numpy versions in ``fairbell._kernels_py`` are used. Set
``FAIRBELL_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py as python_backend

try:
    if os.environ.get("FAIRBELL_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as compiled_backend
except ImportError:
    compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

lhv_extremal_bounds = _impl.lhv_extremal_bounds
fit_product_binomial = _impl.fit_product_binomial
pure_ratio_value_grad = _impl.pure_ratio_value_grad

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "lhv_extremal_bounds",
    "fit_product_binomial",
    "pure_ratio_value_grad",
]
