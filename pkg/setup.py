"""Build script for the optional compiled kernels.

The extension is optional: if Cython or a C compiler is unavailable the
package still installs and falls back to the numpy implementation.
"""
import os

import numpy as np
from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    openmp = os.environ.get("CHNSDBC_NO_OPENMP") is None
    cflags = ["-O3", "-ffp-contract=off"]
    lflags = []
    if openmp:
        cflags.append("-fopenmp")
        lflags.append("-fopenmp")
    ext = Extension(
        "chnsdbc._banded",
        ["src/chnsdbc/_banded.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=cflags,
        extra_link_args=lflags,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
