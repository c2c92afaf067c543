"""Pick the compiled kernels when available, else the numpy fallback.

Set ``GFDETECT_BACKEND=python`` to force the fallback (the benchmark and the
backend-parity tests do this per call through :func:`load`).
"""
from __future__ import annotations

import importlib
import os


def load(name: str | None = None):
    """Return a kernel module by name ('compiled' or 'python')."""
    name = name or os.environ.get("GFDETECT_BACKEND", "").strip().lower() or "auto"
    if name in ("auto", "compiled"):
        try:
            return importlib.import_module("gfdetect._kernels")
        except ImportError:
            if name == "compiled":
                raise
    elif name != "python":
        raise ValueError(f"unknown GFDETECT_BACKEND {name!r}")
    return importlib.import_module("gfdetect._pykernels")


def available() -> list[str]:
    names = ["python"]
    try:
        importlib.import_module("gfdetect._kernels")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


kernels = load()
BACKEND = kernels.BACKEND_NAME
