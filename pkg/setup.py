"""Build script: compiles the optional reward-kernel extension when Cython
and a C compiler are available.  The package is fully functional without it
(a NumPy fallback is selected at import time), so the extension is marked
optional and any build failure is non-fatal.

To build in place for development / benchmarking:

    python setup.py build_ext --inplace
"""
from setuptools import Extension, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "hetgain._kernels._reward_ext",
        ["src/hetgain/_kernels/_reward_ext.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
