"""Build script: compiles the Cython choice/profit kernels when a toolchain
is available.  The package works without the extension (a NumPy fallback is
selected at import time), so a failed extension build is not fatal.
"""

import numpy
from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/tariffkit/_kernels_c.pyx",
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    )
except ImportError:
    ext_modules = []

setup(
    ext_modules=ext_modules,
    include_dirs=[numpy.get_include()],
)
