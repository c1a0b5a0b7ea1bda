import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("ISOMIX_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "isomix._kernels._speedups",
                    ["src/isomix/_kernels/_speedups.pyx"],
                )
            ],
            language_level="3",
        )
    except ImportError:
        # Pure-Python install; isomix._kernels falls back to the numpy backend.
        ext_modules = []

setup(ext_modules=ext_modules)
