import os

import numpy as np
from setuptools import Extension, setup

# MRACREF_NO_EXT=1 skips the compiled core; the package then runs on the numpy fallback.
if os.environ.get("MRACREF_NO_EXT", "") not in ("", "0"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("mracref._ckernel", ["src/mracref/_ckernel.pyx"],
                   include_dirs=[np.get_include()], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
