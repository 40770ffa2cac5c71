import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # Package works without the extension: the NumPy fallback kernels are
    # selected at import time (see jdcontrol._kernels).
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "jdcontrol._kernels._fast",
                ["src/jdcontrol/_kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: run-to-run reproducibility matters more
                # than the last few percent of speed
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
