"""Kernel backend selection.

The hot loops (case-table surface extraction, the topology march, and the
triangle-pair intersection batch) exist twice: a Cython extension
(``cortexkit._native``) and a pure numpy/python fallback (``_purepy``).
Both must return bit-identical arrays; the test suite asserts it.

``CORTEXKIT_BACKEND`` forces a choice: ``native`` or ``pure``. Unset or
empty prefers the extension and silently falls back when it is missing.
"""

from __future__ import annotations

import os

from . import _purepy

BACKEND_CHOICES = ("native", "pure")


def load_backend(name: str):
    """Import a backend module by name, for benchmarks and parity tests."""
    if name == "pure":
        return _purepy
    if name == "native":
        from cortexkit import _native  # type: ignore[attr-defined]

        return _native
    raise ValueError(f"unknown backend {name!r}, expected one of {BACKEND_CHOICES}")


def _select():
    forced = os.environ.get("CORTEXKIT_BACKEND", "").strip().lower()
    if forced:
        if forced not in BACKEND_CHOICES:
            raise ImportError(
                f"CORTEXKIT_BACKEND={forced!r} not recognized; use 'native' or 'pure'"
            )
        return load_backend(forced), forced
    try:
        return load_backend("native"), "native"
    except ImportError:
        return _purepy, "pure"


kernels, BACKEND_NAME = _select()
