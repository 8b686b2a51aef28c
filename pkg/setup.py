"""Build script: compiles the resolution kernel as an optional C extension.

The package is fully functional without the extension (foalp._kernel is the
pure-Python reference); when Cython and a C compiler are present, the same
source is compiled as foalp._ckernel and selected at import time.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "foalp._ckernel",
                sources=["src/foalp/_ckernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
