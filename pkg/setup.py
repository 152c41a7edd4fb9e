"""Build script for the compiled convolution kernels.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the conv hot loops faster.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "vascnav.nn._convkernel",
        ["src/vascnav/nn/_convkernel.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
