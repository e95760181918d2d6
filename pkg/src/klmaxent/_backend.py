"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-numpy module is
the fallback.  ``KLMAXENT_BACKEND=python`` forces the fallback, which is also
what the backend-comparison benchmark uses to time both implementations in
one process.
"""

import os

from . import _pycore

_FORCED = os.environ.get("KLMAXENT_BACKEND", "").strip().lower()

if _FORCED in ("python", "numpy"):
    _active = _pycore
else:
    try:
        from . import _fastcore as _active  # type: ignore[no-redef]
    except ImportError:
        _active = _pycore


def active():
    """Module implementing the hot kernels for this process."""
    return _active


def active_name():
    return _active.NAME


def resolve(name=None):
    """Kernel module by name: None/'auto' -> selected, else 'compiled'/'python'."""
    if name is None or name == "auto":
        return _active
    if name in ("python", "numpy"):
        return _pycore
    if name == "compiled":
        from . import _fastcore  # raises ImportError if the extension is absent

        return _fastcore
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        from . import _fastcore  # noqa: F401

        names.insert(0, "compiled")
    except ImportError:
        pass
    return names
