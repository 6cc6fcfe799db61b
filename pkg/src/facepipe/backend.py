"""Numeric backend selection.

Hot kernels ship in two flavours: numba @njit loops and vectorized
pure-numpy fallbacks.  The active backend is chosen once at import from the
FACEPIPE_BACKEND environment variable ("numba", "numpy" or "auto"); tests
and the benchmark can override it at runtime with set_backend().
"""

from __future__ import annotations

import os

_VALID = ("auto", "numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _resolve(choice: str) -> str:
    if choice not in _VALID:
        raise ValueError(f"FACEPIPE_BACKEND must be one of {_VALID}, got {choice!r}")
    if choice == "numba" and not _numba_available():
        raise RuntimeError("FACEPIPE_BACKEND=numba but numba is not importable")
    if choice == "auto":
        return "numba" if _numba_available() else "numpy"
    return choice


_backend = _resolve(os.environ.get("FACEPIPE_BACKEND", "auto"))


def get_backend() -> str:
    """Return the active backend name, "numba" or "numpy"."""
    return _backend


def set_backend(choice: str) -> None:
    """Force the backend; accepts "auto", "numba" or "numpy"."""
    global _backend
    _backend = _resolve(choice)


def using_numba() -> bool:
    return _backend == "numba"
