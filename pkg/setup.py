from setuptools import setup, Extension

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("clarens._ttsearch", ["src/clarens/_ttsearch.pyx"])],
        language_level=3,
    )
except ImportError:
    # Pure-python search fallback still works, just slower.
    ext_modules = []

setup(ext_modules=ext_modules)
