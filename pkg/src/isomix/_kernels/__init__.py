"""Backend selection for the hot kernels.

The compiled extension is used when available; ``ISOMIX_PURE_PYTHON=1``
forces the numpy fallback.  Both backends expose the same two callables:
``pava_kernel`` and ``em_pava_run``.
"""

import os

from . import _reference as reference

BACKEND = "python"
pava_kernel = reference.pava_kernel
em_pava_run = reference.em_pava_run

if not os.environ.get("ISOMIX_PURE_PYTHON"):
    try:
        from ._speedups import em_pava_run, pava_kernel  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass
