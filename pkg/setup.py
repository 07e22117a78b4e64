import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the compiled kernels if possible; the pure-Python fallback
    keeps the package fully functional when compilation is unavailable."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"WARNING: compiled kernels skipped ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: could not build {ext.name} ({exc}); using pure-Python fallback")


def extensions():
    if os.environ.get("CROSSVIEW_NO_EXT"):
        return []
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "crossview._kernels._core",
        ["src/crossview/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
