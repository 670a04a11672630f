"""Build the optional compiled kernels.

The package works without them: ``supround._kernels`` falls back to the
numpy implementations when the extension is missing.
"""
from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # no build toolchain, pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "supround._kernels._ckernels",
                ["src/supround/_kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
