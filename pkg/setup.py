"""Build script: compiles the optional Cython hot kernel.

The package works without the extension (a pure-Python fallback is
selected at import time), so any build failure here is non-fatal.
"""
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/tppattack/kernels/_hawkes_c.pyx"],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - depends on build env
    print(f"skipping compiled kernels ({exc}); pure-Python fallback will be used")

setup(ext_modules=ext_modules)
