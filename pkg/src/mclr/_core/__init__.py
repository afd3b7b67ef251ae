"""Monte-Carlo kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imports; set ``MCLR_BACKEND=python``
to force the fallback or ``MCLR_BACKEND=compiled`` to fail loudly when the
extension is missing.
"""

import os

from . import _fallback

_requested = os.environ.get("MCLR_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _fallback

BACKEND = "compiled" if _impl is not _fallback else "python"
draw_components = _impl.draw_components
stream_normals = _impl.stream_normals
