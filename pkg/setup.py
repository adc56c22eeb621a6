"""Build script: compiles the optional trial kernel.

The package works without the extension; ``ghzlab.kernels`` falls back to
the numpy implementation when ``ghzlab._speedups`` cannot be imported.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension(
            "ghzlab._speedups",
            ["src/ghzlab/_speedups.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
        )],
        compiler_directives=dict(
            language_level="3",
            boundscheck=False,
            wraparound=False,
            cdivision=True,
        ),
    )

setup(ext_modules=ext_modules)
