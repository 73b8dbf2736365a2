from setuptools import Extension, setup
from Cython.Build import cythonize
import numpy as np

ext = Extension(
    "rarity_metrics._kernels",
    ["src/rarity_metrics/_kernels.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3", "-fopenmp"],
    extra_link_args=["-fopenmp"],
)

setup(ext_modules=cythonize([ext], language_level="3"))
