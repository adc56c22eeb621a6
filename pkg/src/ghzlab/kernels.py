"""Selects the trial kernel: compiled ``_speedups`` if importable, else numpy.

Set ``GHZLAB_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from ghzlab import _kernel_py

BACKEND = "python"
_compiled = None

if os.environ.get("GHZLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ghzlab import _speedups as _compiled
    except ImportError:
        _compiled = None
    else:
        BACKEND = "cython"

_impl = _compiled if _compiled is not None else _kernel_py

run_block = _impl.run_block
trial_uniforms = _impl.trial_uniforms


def get_backend(name: str | None = None):
    """Kernel module by name ("cython" or "python"); None means the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernel_py
    if name == "cython":
        if _compiled is None:
            try:
                from ghzlab import _speedups
            except ImportError as exc:
                raise RuntimeError("compiled kernel not built; run `pip install -e .`") from exc
            return _speedups
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")
