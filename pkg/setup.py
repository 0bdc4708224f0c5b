import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SCHWINGER_QKE_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "schwinger_qke._kernel",
                    ["src/schwinger_qke/_kernel.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
