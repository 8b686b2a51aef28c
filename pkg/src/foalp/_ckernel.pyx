# cython: language_level=3, boundscheck=False, wraparound=False
# Compiled twin of the pure-Python resolution kernel.  The implementation
# lives in _kernel.py; this file exists so Cython builds it as an extension
# with the same module-level API.

include "_kernel.py"
