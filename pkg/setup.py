"""Build the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
numpy fallback is used at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("POLARON_BOUND_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "polaron_bound._kernels",
                    ["src/polaron_bound/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
