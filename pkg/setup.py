"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the build therefore degrades gracefully when
Cython or a C compiler is unavailable.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, otherwise continue without it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing
            print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); "
                  "the numpy fallback will be used", file=sys.stderr)


ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "srca._kernels",
                ["src/srca/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("warning: Cython not available; building without compiled kernels",
          file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
