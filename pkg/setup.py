"""Builds the optional compiled kernel.

The package works without it (a pure-numpy fallback is selected at import
time), so the extension is marked optional: if Cython or a C compiler is
missing the install proceeds with the fallback.
"""
import sys

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "regimepricer._kernels._core",
                ["src/regimepricer/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("Cython not available; building with the pure-python kernel only",
          file=sys.stderr)

setup(ext_modules=ext_modules)
