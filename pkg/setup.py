"""Build script with an optional compiled kernel extension.

The package is fully functional as pure Python + NumPy.  When Cython and a
C compiler are available, ``serls.kernels._native`` is built and picked up
automatically at import time; otherwise the build silently falls back to
the pure implementation.  Build in place for development with::

    python setup.py build_ext --inplace
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to a warning instead of failing the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing entirely
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            "WARNING: could not build the native kernels (%s); "
            "falling back to the pure NumPy implementation." % exc
        )


def extensions():
    if os.environ.get("SERLS_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "serls.kernels._native",
        sources=["src/serls/kernels/_native.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
