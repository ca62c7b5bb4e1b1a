import os

from setuptools import Extension, setup

# The compiled kernels are optional; the package falls back to pure Python.
ext_modules = []
if not os.environ.get("EWDLOSS_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "ewdloss._ckernels",
                    ["src/ewdloss/_ckernels.pyx"],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
