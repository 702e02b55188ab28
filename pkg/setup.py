import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("LROM_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python fallback is used at import time
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "lrom._kernels",
            ["src/lrom/_kernels.pyx"],
            include_dirs=[np.get_include()],
            language="c++",
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize(
            [ext],
            compiler_directives={"language_level": 3, "boundscheck": False, "wraparound": False, "cdivision": True},
        )

setup(ext_modules=ext_modules)
