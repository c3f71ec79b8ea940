"""Select the compiled kernels when built, else the numpy fallback.

Set ``FERMIKIN_BACKEND=python`` to force the fallback.
"""
import os

from fermikin import _pykernels

python_kernels = _pykernels

try:
    from fermikin import _kernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("FERMIKIN_BACKEND", "").lower() != "python":
    kernels = compiled_kernels
    BACKEND = "cython"
else:
    kernels = _pykernels
    BACKEND = "python"
