"""Build script: compiles the optional accelerated kernels.

The package is fully functional without the extension; `fractrans._core`
falls back to the numpy implementations when the compiled module is
missing (see benchmarks/bench_core.py for the speed comparison).
"""

from setuptools import Extension, setup

extensions = []
try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "fractrans._core._kernels",
                ["src/fractrans/_core/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=extensions)
