"""Build the optional Cython walk kernel.

The package works without it; ``rctnet._backend`` falls back to the numpy
kernel when the extension cannot be imported.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("RCTNET_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "rctnet._gsw_ext",
                    ["src/rctnet/_gsw_ext.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
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
