"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``DCONE_KERNEL=python`` to force the fallback, ``DCONE_KERNEL=cython``
to fail loudly when the extension is missing.
"""

import logging
import os

from . import _kernels_py

logger = logging.getLogger(__name__)

python_point_energy = _kernels_py.point_energy

try:
    from ._kernels import point_energy as compiled_point_energy
except ImportError:  # pragma: no cover - depends on the build
    compiled_point_energy = None

_choice = os.environ.get("DCONE_KERNEL", "auto").lower()
if _choice == "cython" and compiled_point_energy is None:
    raise ImportError("DCONE_KERNEL=cython but dcone._kernels is not built")
if _choice == "python" or compiled_point_energy is None:
    point_energy = python_point_energy
    BACKEND = "python"
else:
    point_energy = compiled_point_energy
    BACKEND = "cython"

logger.debug("dcone kernel backend: %s", BACKEND)


def get_kernel(name=None):
    if name is None:
        return point_energy
    if name == "python":
        return python_point_energy
    if name == "cython":
        if compiled_point_energy is None:
            raise ImportError("compiled kernel not available")
        return compiled_point_energy
    raise ValueError(f"unknown kernel {name!r}")
