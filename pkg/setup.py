"""Build script: compiles the optional Cython RHS kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here is non-fatal.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from setuptools import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "hypwave.kernels._core",
                ["src/hypwave/kernels/_core.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"hypwave: skipping Cython kernel build ({exc}); "
          "the pure-numpy fallback will be used")

setup(ext_modules=ext_modules)
