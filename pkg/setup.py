"""Build script: compiles the optional Cython kernel module.

The package is fully functional without the extension; mmflow.kernels
falls back to the vectorized NumPy implementations at import time.
Build in place with

    python setup.py build_ext --inplace
"""

import numpy as np
from setuptools import Extension, setup

extensions = []
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "mmflow._kernels_cy",
                ["src/mmflow/_kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - depends on build environment
    print(f"mmflow: skipping Cython extension build ({exc}); "
          "the pure NumPy kernels will be used instead")

setup(ext_modules=extensions)
