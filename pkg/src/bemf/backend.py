"""Kernel backend selection.

The compiled Cython kernels are preferred when the extension built; the
numpy implementation is the fallback and the reference for semantics. Set
BEMF_BACKEND=python or BEMF_BACKEND=compiled to force one side (forcing
"compiled" when the extension is missing is an error rather than a silent
downgrade).

Non-logistic activations always run on the numpy backend, which accepts
arbitrary activation callables; the compiled kernels hard-code the
logistic.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_ENV_VAR = "BEMF_BACKEND"


def compiled_available() -> bool:
    return _compiled is not None


def active_backend() -> str:
    """Resolve the backend name: 'compiled' or 'python'."""
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice in ("", "auto"):
        return "compiled" if _compiled is not None else "python"
    if choice == "python":
        return "python"
    if choice == "compiled":
        if _compiled is None:
            raise RuntimeError(
                f"{_ENV_VAR}=compiled but the compiled kernels are not "
                "built; reinstall with a C toolchain or unset the variable")
        return "compiled"
    raise ValueError(f"{_ENV_VAR} must be 'compiled' or 'python', got {choice!r}")


def get_kernels(activation: str = "logistic"):
    """Kernel namespace for the given activation name."""
    if activation != "logistic":
        return _kernels_py
    return _compiled if active_backend() == "compiled" else _kernels_py
