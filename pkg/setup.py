"""Build script: compiles the optional Crypto-PAn accelerator.

The package is fully functional without the extension (a pure-Python
backend is selected at import time), so a failed compile downgrades to a
warning instead of aborting the install.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
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
            f"WARNING: building the netchar._cryptopan accelerator failed ({exc}); "
            "falling back to the pure-Python backend",
            file=sys.stderr,
        )


ext_modules = []
if not os.environ.get("NETCHAR_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("netchar._cryptopan", ["src/netchar/_cryptopan.pyx"])],
            language_level="3",
        )
    except ImportError:
        print(
            "WARNING: Cython not available; installing netchar without the "
            "compiled Crypto-PAn backend",
            file=sys.stderr,
        )

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
