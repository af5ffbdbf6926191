"""Kernel backend selection.

Two implementations of the hot convolution loops exist: numba-jitted loops
(fast, default) and a vectorized pure-numpy path. The active backend is
chosen by the STSCONV_BACKEND environment variable ("numba", "numpy" or
"auto"), or overridden programmatically with `use_backend`. Both backends
satisfy the same contracts; tests run the full suite against each.
"""

from __future__ import annotations

import contextlib
import os

_ENV_VAR = "STSCONV_BACKEND"
_override: str | None = None
_numba_available: bool | None = None


def numba_available() -> bool:
    global _numba_available
    if _numba_available is None:
        try:
            import numba  # noqa: F401

            _numba_available = True
        except ImportError:
            _numba_available = False
    return _numba_available


def get_backend() -> str:
    """Return the active backend name, "numba" or "numpy"."""
    choice = _override or os.environ.get(_ENV_VAR, "auto").lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {choice!r}")
    if choice == "numba" and not numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    if choice == "auto":
        choice = "numba" if numba_available() else "numpy"
    return choice


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily force a backend (for tests and benchmarks)."""
    global _override
    prev = _override
    _override = name
    get_backend()  # validate early
    try:
        yield
    finally:
        _override = prev


def set_num_threads(n: int) -> None:
    """Cap numba worker threads. Results are identical for any count."""
    if numba_available():
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
