from setuptools import Extension, setup

import numpy

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "laggard.kernels._fast",
                ["src/laggard/kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Pure-python kernels are used when the compiled extension is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
