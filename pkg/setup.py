from setuptools import Extension, setup

import numpy as np

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled box kernels are optional: comicdet.kernels falls back to the
# NumPy reference implementation when the extension is unavailable.
ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "comicdet.kernels._box_kernels",
                ["src/comicdet/kernels/_box_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
