import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# SHE_MOMENTS_NO_EXT=1 skips the compiled kernel; the package then runs on the
# numpy fallback.
BUILD_EXT = cythonize is not None and not os.environ.get("SHE_MOMENTS_NO_EXT")

ext_modules = []
if BUILD_EXT:
    npy_random_lib = os.path.join(os.path.dirname(np.__file__), "random", "lib")
    ext = Extension(
        "she_moments.mc._kernel",
        ["src/she_moments/mc/_kernel.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[npy_random_lib],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # no FMA contraction: keeps the stencil bit-identical to the numpy path
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
