"""Build script: compiles the sampling-operator kernels when Cython and a C
compiler are available.  The package falls back to a NumPy/SciPy
implementation at import time if the extension is missing, so a failed build
is not fatal."""

import os

import numpy as np
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    extra_args = ["-O3", "-march=native", "-funroll-loops", "-ffast-math"]
    link_args = []
    if os.environ.get("DCPROX_NO_OPENMP", "0") != "1":
        extra_args.append("-fopenmp")
        link_args.append("-fopenmp")
    ext_modules = cythonize(
        [
            Extension(
                "dcprox._kernels",
                ["src/dcprox/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=extra_args,
                extra_link_args=link_args,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
