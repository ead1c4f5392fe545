import os

from setuptools import setup

ext_modules = []
if os.environ.get("PLUME_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "plume._kernels",
            ["src/plume/_kernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize(
            [ext],
            language_level=3,
            compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
        )
    except ImportError:
        # no Cython/numpy at build time: the pure-Python kernels are used
        ext_modules = []

setup(ext_modules=ext_modules)
