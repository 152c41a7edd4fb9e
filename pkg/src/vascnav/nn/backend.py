"""Selects the conv kernel implementation at import time.

Prefers the compiled extension, falls back to the numpy implementation when it
is missing (pure checkout, failed build). VASCNAV_CONV_BACKEND=numpy|compiled
forces a choice; forcing "compiled" raises if the extension is unavailable.
"""

import os

_forced = os.environ.get("VASCNAV_CONV_BACKEND", "").strip().lower()

if _forced == "numpy":
    from vascnav.nn import _conv_numpy as _impl

    COMPILED = False
elif _forced == "compiled":
    from vascnav.nn import _convkernel as _impl  # noqa: F401

    COMPILED = True
else:
    try:
        from vascnav.nn import _convkernel as _impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        from vascnav.nn import _conv_numpy as _impl  # type: ignore[no-redef]

        COMPILED = False

im2row = _impl.im2row
col2im_add = _impl.col2im_add


def backend_name():
    return "compiled" if COMPILED else "numpy"
