import numpy as np
from setuptools import Extension, setup


def get_extensions():
    """Cythonize the entmax kernels; fall back to pure Python when Cython is missing."""
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("WARNING: Cython not available. Using pure Python implementation.")
        return []

    extensions = [
        Extension(
            "armlet._entmax_ext",
            sources=["src/armlet/_entmax_ext.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
        )
    ]
    return cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
            "nonecheck": False,
        },
    )


setup(ext_modules=get_extensions())
