import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; fracembed._core falls back to numpy
    cythonize = None

extensions = []
if cythonize is not None and not os.environ.get("FRACEMBED_NO_EXT"):
    extensions = cythonize(
        [
            Extension(
                "fracembed._core._ckernels",
                ["src/fracembed/_core/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
