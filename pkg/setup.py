import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernels are optional at runtime: stereoweave.kernels falls back
# to the numpy reference backend when the extension is absent.
# -ffp-contract=off keeps the C float ops bit-identical to the numpy backend
# (no fused multiply-add), which the backend-equivalence tests rely on.
setup(
    ext_modules=cythonize(
        [
            Extension(
                "stereoweave.kernels._native",
                ["src/stereoweave/kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
)
