"""Build hook for the optional compiled flow kernel.

The package is fully functional without the extension; oisalign.kernels
falls back to the numpy implementation when the import fails.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "oisalign._flowkernel",
                ["src/oisalign/_flowkernel.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
