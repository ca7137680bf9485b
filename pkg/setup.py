"""Optional build of the compiled kernel core.

The package is fully functional without compilation (a vectorized numpy
fallback is selected at import time).  When Cython and a C compiler are
available, the hot scalar kernel loops are built as `expdist._kernels_fast`.
The extension is marked optional so a failed build never breaks the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "expdist._kernels_fast",
                ["src/expdist/_kernels_fast.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
