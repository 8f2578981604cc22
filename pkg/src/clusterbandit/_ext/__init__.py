"""Numerical kernels: a compiled Cython build and a pure-numpy twin.

Both backends accumulate squared differences coordinate by coordinate in
the same order, so their outputs agree bit for bit.
"""
