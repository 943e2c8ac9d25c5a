"""Build script for the compiled split/routing kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time); set FORESTFLOW_PURE=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("FORESTFLOW_PURE") == "1":
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "forestflow._kernels._core",
        sources=["src/forestflow/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        # No -ffast-math: the fallback kernel must produce bit-identical
        # results, which requires strict IEEE arithmetic here.
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
