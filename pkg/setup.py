"""Build shim: compiles the optional Monte Carlo kernel extension.

The extension is a pure speedup; when Cython or a C compiler is missing the
package installs without it and the numpy kernels take over at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "enlarge_lab.mc._kernels",
                ["src/enlarge_lab/mc/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
