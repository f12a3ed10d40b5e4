import os

import numpy as np
from setuptools import Extension, setup

# PMMATCH_NO_EXT=1 skips the compiled core; the package then runs on the
# numpy fallback.
ext_modules = []
if not os.environ.get("PMMATCH_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pmmatch._kernels",
                ["src/pmmatch/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
