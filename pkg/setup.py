"""Build script for the optional Cython kernel extension.

The package is fully functional without the extension: ``fedflip._kernels``
falls back to the NumPy implementation when the compiled module is missing,
so the extension is marked optional and a failed compile does not abort the
install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "fedflip._kernels._core",
                ["src/fedflip/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
