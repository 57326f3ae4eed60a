"""Hot-loop backends: compiled core when built, NumPy fallback otherwise.

Both backends implement ``solve_layered`` with bit-identical results; the
benchmark under benchmarks/ compares their throughput.
"""

from . import _numpy_core

try:
    from . import _solver_core  # compiled extension

    _default = _solver_core
    BACKEND = "cython"
except ImportError:
    _solver_core = None
    _default = _numpy_core
    BACKEND = "numpy"

solve_layered = _default.solve_layered


def available_backends() -> dict:
    """Name -> module for every importable backend."""
    out = {"numpy": _numpy_core}
    if _solver_core is not None:
        out["cython"] = _solver_core
    return out


def get_backend(name: str):
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(available_backends())}") from None
