import os

import numpy as np
from setuptools import Extension, setup

# USTAT_BOUNDS_NO_EXT=1 skips the compiled core; the package then runs on the
# numpy fallback in _pykernels.
ext_modules = []
if not os.environ.get("USTAT_BOUNDS_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ustat_bounds._ckernels",
                ["src/ustat_bounds/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: results must match the fallback bit for bit
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
