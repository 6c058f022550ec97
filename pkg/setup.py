"""Build script: compiles the optional C extension kernel.

The package works without the extension (a pure-Python kernel is selected
at import time); the extension only accelerates the hot loops.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/smk/_core/ckernel.pyx"],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"smk: building without compiled kernel ({exc})")

setup(ext_modules=ext_modules)
