"""Select the compiled coupling kernel, or the numpy fallback.

Set ``LSGATE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
apply_couplings = _kernels_py.apply_couplings

if not os.environ.get("LSGATE_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        apply_couplings = _ckernels.apply_couplings
        BACKEND = "cython"

python_apply_couplings = _kernels_py.apply_couplings
