"""Select the Gram-kernel backend at import time.

The compiled extension is preferred when it imported cleanly; the
ADAFLIGHT_BACKEND environment variable ("cython" or "numpy") forces a
choice and raises if the forced backend is unavailable.
"""
import os

from . import _gram_np

try:
    from . import _gramcore
except ImportError:
    _gramcore = None

_forced = os.environ.get("ADAFLIGHT_BACKEND", "").strip().lower()
if _forced == "numpy":
    impl = _gram_np
elif _forced == "cython":
    if _gramcore is None:
        raise ImportError(
            "ADAFLIGHT_BACKEND=cython but the compiled extension is not built"
        )
    impl = _gramcore
elif _forced:
    raise ImportError(f"unknown ADAFLIGHT_BACKEND value: {_forced!r}")
else:
    impl = _gramcore if _gramcore is not None else _gram_np

BACKEND_NAME = impl.BACKEND_NAME
multi_gram = impl.multi_gram
multi_gram_scaled = impl.multi_gram_scaled
