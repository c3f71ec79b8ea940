"""Build script for the optional compiled kernels.

The package is fully functional without them; ``fermikin._backend`` falls
back to the numpy implementations when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("FERMIKIN_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "fermikin._kernels",
                    ["src/fermikin/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
