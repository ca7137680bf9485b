"""Select the implicit-solver backend at import time.

The compiled extension (`expdist._kernels_fast`) is preferred when present;
the vectorized numpy implementation is the fallback and the reference.
`EXPDIST_BACKEND=python|compiled` forces a choice (the latter raises if the
extension is missing rather than silently degrading).
"""

import os

from . import _kernels_py

_env = os.environ.get("EXPDIST_BACKEND", "").strip().lower()

if _env == "python":
    _impl = _kernels_py
    BACKEND_NAME = "python"
elif _env == "compiled":
    from . import _kernels_fast as _impl  # noqa: F401

    BACKEND_NAME = "compiled"
else:
    try:
        from . import _kernels_fast as _impl

        BACKEND_NAME = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND_NAME = "python"

ap_inverse = _impl.ap_inverse
atilde_inverse = _impl.atilde_inverse
ap_lambda_inverse = _impl.ap_lambda_inverse
v_solve = _impl.v_solve
t_solve = _impl.t_solve


def backend_name():
    """Name of the active backend: 'compiled' or 'python'."""
    return BACKEND_NAME
