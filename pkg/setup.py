import os

from setuptools import setup, Extension

ext_modules = []
if os.environ.get("CLUSTERBANDIT_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
        import numpy as np
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "clusterbandit._ext.kernels",
                    ["src/clusterbandit/_ext/kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # no FMA contraction: keeps rounding identical to the numpy fallback
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
