import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# FMA contraction would make the compiled intersection math differ from the
# numpy reference path in the last bit.
extensions = [
    Extension(
        "colocov._kernels",
        ["src/colocov/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
