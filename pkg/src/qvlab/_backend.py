"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the NumPy
fallback. Set ``QVLAB_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from qvlab import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("QVLAB_BACKEND", "").lower() != "python":
    try:
        from qvlab import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

char_function = _impl.char_function
isotonic_increasing = _impl.isotonic_increasing
election_sums = _impl.election_sums
