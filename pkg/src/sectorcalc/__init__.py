"""Numerical functional calculus for sectorial matrices.

Modules:
  functions    function specifications, class tags and combinators
  classcheck   grid falsifiers for the class inequalities and kappa estimates
  quad         adaptive Gauss-Kronrod quadrature for improper integrals
  scalarcalc   ray representations of the scalar resolvent (z + f(lambda))^{-1}
  sectorial    certified sectorial matrices, matrix functions, fractional powers
  opcalc       operator resolvents, sectoriality bounds, subordination, Ritt checks
  cli          JSON job runner

Submodules are imported explicitly (``from sectorcalc import opcalc``) so
that importing the package does not load numpy before the CLI has set the
thread count.
"""

__version__ = "0.1.0"
