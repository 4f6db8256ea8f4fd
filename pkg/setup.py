import sys

from setuptools import setup

# The compiled alignment kernels are optional: the package falls back to the
# pure-numpy implementation at import time if the extension is absent.
ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dynsim._kernels._cyloops",
                ["src/dynsim/_kernels/_cyloops.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"warning: building without compiled kernels ({exc})\n")

setup(ext_modules=ext_modules)
