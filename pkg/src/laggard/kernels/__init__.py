"""Backend selection for the sampler's hot numeric kernels.

The compiled Cython backend is used when importable; set
``LAGGARD_KERNELS=python`` or ``LAGGARD_KERNELS=cython`` to force a
backend (forcing cython raises if the extension is missing).
"""

import os

from . import _purepy

_choice = os.environ.get("LAGGARD_KERNELS", "").lower()

if _choice == "python":
    _impl = _purepy
elif _choice == "cython":
    from . import _fast as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _purepy

BACKEND = _impl.BACKEND
interval_sums = _impl.interval_sums
gram_moment = _impl.gram_moment
add_block = _impl.add_block

__all__ = ["BACKEND", "interval_sums", "gram_moment", "add_block", "_purepy"]
