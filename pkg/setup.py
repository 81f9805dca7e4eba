from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps the compiled kernel bit-identical to the pure-Python
# fallback (no FMA contraction of a*b+c).
ext_modules = [
    Extension(
        "doublewell._kernel_cy",
        ["src/doublewell/_kernel_cy.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(ext_modules, language_level="3"))
