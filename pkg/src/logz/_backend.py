"""Selects the ULA kernel implementation at import time.

The compiled extension is preferred; setting ``LOGZ_BACKEND=python`` (or a
failed import) selects the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

NAME = "python"
compiled = None

if os.environ.get("LOGZ_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as compiled  # type: ignore[no-redef]

        NAME = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        compiled = None

fallback = _kernels_py
