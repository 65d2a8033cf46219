"""Build script: compiles the optional speedup extension when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here downgrades to a pure-Python install
instead of aborting.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "segboost._speedups",
                ["src/segboost/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off keeps float results bitwise identical to
                # the numpy fallback (no fused multiply-add).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - environment dependent
    print(f"segboost: building without compiled speedups ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
