"""Build script: compiles the optional Cython kernel extension.

The extension is a pure speedup; when Cython or numpy are missing at build
time (or compilation fails) the package installs without it and the numpy
fallback in dpoad._kernels is selected at import.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/dpoad/_kernels/_ckern.pyx",
        language_level="3",
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    )
    for ext in ext_modules:
        ext.include_dirs.append(np.get_include())
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
