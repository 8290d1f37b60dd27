import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DYNREG_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "dynreg._kernels",
                    ["src/dynreg/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=ext_modules)
