"""Build script. The compiled kernel extension is optional: if Cython or a
C compiler is unavailable the package falls back to the pure-Python kernels
at import time."""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "prisam._kernels._fast",
                sources=["src/prisam/_kernels/_fast.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=extensions)
