"""Kernel backend selection.

The hot inner loops (quad/box clipping, overlap matrices, assignment) exist
twice: a Cython extension (crossview._kernels._core) and a pure-Python twin
(crossview._kernels.pure). The compiled backend is preferred when importable;
set CROSSVIEW_KERNELS=pure or CROSSVIEW_KERNELS=compiled to force one.
Both backends produce bitwise-identical results.
"""

import os

from . import pure as _pure

_choice = os.environ.get("CROSSVIEW_KERNELS", "").strip().lower()

if _choice == "pure":
    _impl = _pure
elif _choice == "compiled":
    from . import _core as _impl
elif _choice in ("", "auto"):
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pure
else:
    raise ImportError(f"CROSSVIEW_KERNELS must be 'pure' or 'compiled', got {_choice!r}")

BACKEND = _impl.BACKEND
polygon_area = _impl.polygon_area
quad_box_intersection_area = _impl.quad_box_intersection_area
intersection_matrix = _impl.intersection_matrix
solve_assignment = _impl.solve_assignment


def active_backend():
    """Name of the kernel backend in use: 'compiled' or 'pure'."""
    return BACKEND
