"""Hot-kernel backend selection.

The compiled extension (``_core``, built from ``_core.pyx``) is preferred
when present; the NumPy implementation in :mod:`.pure` is the fallback.
Set ``JUMPMLMC_PURE=1`` to force the fallback regardless of what is built.
"""
from __future__ import annotations

import os

from . import pure

if os.environ.get("JUMPMLMC_PURE", "") not in ("", "0"):
    _impl = pure
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = pure

BACKEND: str = _impl.BACKEND
interp_lattice = _impl.interp_lattice
locate_chords = _impl.locate_chords
assemble_p1 = _impl.assemble_p1
tri_geometry = pure.tri_geometry

__all__ = [
    "BACKEND",
    "interp_lattice",
    "locate_chords",
    "assemble_p1",
    "tri_geometry",
    "pure",
]
