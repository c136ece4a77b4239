"""
Build script for the optional Cython kernels.
All other metadata is in pyproject.toml. If Cython or a C compiler is not
available the package installs without the extension and falls back to the
pure-Python kernels at import time.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("LHASYNTH_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "lhasynth._ckernels",
                    [os.path.join("src", "lhasynth", "_ckernels.pyx")],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
