"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Both backends implement the same three functions with bit-identical
results (see ``_fallback`` for the arithmetic contract); ``BACKEND``
records which one is active.  ``use_backend`` exists for tests and the
benchmark; normal code never calls it.
"""

try:
    from forestflow._kernels import _core as _impl
    BACKEND = "compiled"
except ImportError:  # extension not built; pure-python install
    from forestflow._kernels import _fallback as _impl
    BACKEND = "python"

best_split = _impl.best_split
route_rows = _impl.route_rows
route_rows_override = _impl.route_rows_override


def backend_module(name):
    if name == "compiled":
        from forestflow._kernels import _core
        return _core
    if name == "python":
        from forestflow._kernels import _fallback
        return _fallback
    raise ValueError(f"unknown kernel backend {name!r}")


def use_backend(name):
    """Switch the active backend; returns the previously active name."""
    global BACKEND, best_split, route_rows, route_rows_override
    previous = BACKEND
    mod = backend_module(name)
    best_split = mod.best_split
    route_rows = mod.route_rows
    route_rows_override = mod.route_rows_override
    BACKEND = name
    return previous
