"""Kernel backend selection.

The batched MLP kernels exist twice: a Cython extension over BLAS dgemm
(_kernels_cy) and a pure numpy mirror (_kernels_np). The extension is used
when importable; set MASKCOND_KERNELS=py to force the fallback or
MASKCOND_KERNELS=cy to fail loudly when the extension is missing. Both
backends agree to rounding error (see tests and benchmarks/bench_kernels.py).
"""

import os

from . import _kernels_np
from .errors import ConfigError

_choice = os.environ.get("MASKCOND_KERNELS", "").strip().lower()

if _choice in ("py", "numpy", "python"):
    _impl = _kernels_np
elif _choice in ("", "cy", "compiled"):
    try:
        from . import _kernels_cy as _impl
    except ImportError:
        if _choice:
            raise ConfigError(
                "MASKCOND_KERNELS requested the compiled backend but the "
                "extension is not importable; reinstall or set MASKCOND_KERNELS=py"
            ) from None
        _impl = _kernels_np
else:
    raise ConfigError(f"unknown MASKCOND_KERNELS value {_choice!r}")

BACKEND = _impl.BACKEND
forward = _impl.forward
backward = _impl.backward
grad_norm_backward = _impl.grad_norm_backward
