"""Kernel backend selection.

The compiled module is preferred when present; the numpy fallback is
otherwise selected silently.  ``LATTICEDME_BACKEND=pure`` forces the
fallback, ``LATTICEDME_BACKEND=compiled`` makes a missing extension an
error instead of a downgrade.  Both backends implement the same five
kernels with bit-identical results (the benchmark asserts this).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _fallback

_CHOICES = ("compiled", "pure")


def _load() -> tuple[ModuleType, str]:
    forced = os.environ.get("LATTICEDME_BACKEND")
    if forced is not None and forced not in _CHOICES:
        raise ValueError(
            f"LATTICEDME_BACKEND must be one of {_CHOICES}, got {forced!r}"
        )
    if forced == "pure":
        return _fallback, "pure"
    try:
        from . import _core
    except ImportError:
        if forced == "compiled":
            raise ImportError(
                "LATTICEDME_BACKEND=compiled but the extension is not built; "
                "reinstall with a working C toolchain"
            ) from None
        return _fallback, "pure"
    return _core, "compiled"


_impl, BACKEND = _load()

fwht_inplace = _impl.fwht_inplace
round_nearest = _impl.round_nearest
round_stochastic = _impl.round_stochastic
round_to_residue = _impl.round_to_residue
voronoi_candidates = _impl.voronoi_candidates


def available_backends() -> dict[str, ModuleType]:
    """Importable backends by name; used by the benchmark and tests."""
    found = {"pure": _fallback}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        found["compiled"] = _core
    return found
