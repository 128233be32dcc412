"""Kernel selection: compiled extension if built, pure numpy otherwise.

Set REGIMEPRICER_PURE=1 to force the fallback (used by the kernel
benchmark and the equivalence tests).
"""
import os

from . import _pure

if os.environ.get("REGIMEPRICER_PURE"):
    _impl = _pure
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

COMPILED = _impl.COMPILED

laplace_exact = _impl.laplace_exact
laplace_taylor = _impl.laplace_taylor
laplace_exact_rows = _impl.laplace_exact_rows
phi_weighted_sum = _impl.phi_weighted_sum


def implementations():
    """All available kernel implementations, name -> module."""
    impls = {"pure": _pure}
    try:
        from . import _core
        impls["compiled"] = _core
    except ImportError:
        pass
    return impls
