"""Build the optional compiled kernels.

The extension is marked optional: if Cython or a C compiler is missing the
package still installs and falls back to the pure numpy kernels.
"""
import sys

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    pass
else:
    if sys.platform == "win32":
        omp_compile, omp_link = ["/openmp"], []
    else:
        omp_compile = ["-fopenmp", "-ffp-contract=off"]
        omp_link = ["-fopenmp"]
    ext_modules = cythonize(
        [
            Extension(
                "gcurate._kernels",
                ["src/gcurate/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=omp_compile + ["-O2"],
                extra_link_args=omp_link,
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
