"""Optional compiled-kernel build.

The package installs and runs as pure Python + NumPy.  The hot per-sample
kernels (P1 assembly, lattice interpolation, region location) have a Cython
twin that is picked up automatically when built:

    python3 setup.py build_ext --inplace

`pip install .` does NOT build the extension, so the install never needs a
compiler; run the command above to enable it, and
`benchmarks/bench_kernels.py` to compare both backends.
"""
import sys

from setuptools import setup

ext_modules = []
if "build_ext" in sys.argv:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "jumpmlmc._kernels._core",
                ["src/jumpmlmc/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
