"""Build the optional Cython ray-traversal kernel.

If Cython or a C compiler is unavailable the package still installs and
falls back to the pure-Python tracer at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("TVOED_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "tvoed._siddon",
                    ["src/tvoed/_siddon.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
