"""Numerical laboratory for planar divergence-form elliptic equations with
singular lower-order terms: multipliers, Beltrami reductions, Cauchy and
Beurling transforms, quasi-balls, unique-continuation estimates and Green's
functions, each paired with a verification harness."""

__version__ = "0.1.0"
