import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    ext_modules = cythonize(
        [
            Extension(
                "porophase._kernels",
                ["src/porophase/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # The package still works without the compiled core (pure-numpy fallback).
    ext_modules = []

setup(ext_modules=ext_modules)
