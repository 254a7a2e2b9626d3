import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except Exception:
    cythonize = None

ext_modules = []
if cythonize is not None:
    extensions = [
        Extension(
            "brinkhom._kernels",
            sources=["src/brinkhom/_kernels.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

# the package still works without the extension: brinkhom.kernels falls back
# to the pure-numpy implementations at import time
setup(ext_modules=ext_modules)
