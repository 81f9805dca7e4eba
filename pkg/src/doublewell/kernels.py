"""Backend selection for the stepping core.

The compiled extension is used when importable; otherwise the pure-Python
twin takes over.  Set the environment variable ``DOUBLEWELL_PURE_PYTHON=1``
(before import) to force the fallback, e.g. for the backend benchmark or to
reproduce results without a compiler.

Both backends implement ``run_path_chunk`` with identical numerical
semantics; ``tests/test_kernels.py`` asserts bit-identical output.
"""

from __future__ import annotations

import os

from . import _kernel_py
from ._kernel_py import (  # noqa: F401  (shared code tables)
    RULE_EXIT_ANNULUS,
    RULE_EXIT_INTERVAL,
    RULE_HIT_INTERVAL,
    RULE_NONE,
    SIG_CONSTANT,
    SIG_LINEAR,
    SIG_OSCILLATORY,
    SIG_POLYNOMIAL,
    SIG_TABULATED,
    STOP_NONE,
    STOP_NONFINITE,
    STOP_RULE,
    STOP_TRUNCATION,
    rule_fires,
)

if os.environ.get("DOUBLEWELL_PURE_PYTHON"):
    _impl = _kernel_py
    BACKEND = "python"
else:
    try:
        from . import _kernel_cy as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - source-only installs
        _impl = _kernel_py
        BACKEND = "python"

run_path_chunk = _impl.run_path_chunk


def backend() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return BACKEND


def get_impl(name: str):
    """Return a specific kernel implementation module ('compiled'/'python').

    Raises ImportError if the compiled extension is requested but absent.
    """
    if name == "python":
        return _kernel_py
    if name == "compiled":
        from . import _kernel_cy

        return _kernel_cy
    raise ValueError(f"unknown backend {name!r}")
