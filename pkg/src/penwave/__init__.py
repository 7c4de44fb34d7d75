"""Conformal-method toolkit for radially symmetric exterior nonlinear waves.

Modules:

- ``geometry``   coordinate compactification, conformal factor, frames,
  obstacle boundary curve
- ``nullform``   algebraic null-condition classifier and transformed
  bilinear coefficients
- ``cylinder``   radial operators, quadrature, and weighted norms on the
  compactified cylinder
- ``compat``     compatibility jets of the initial-boundary value problem
- ``solver``     exterior finite-difference evolution and the pushforward
  of trajectories to the cylinder
- ``analysis``   decay fits, energy-inequality and boundedness certificates
- ``cli``        command-line drivers
"""

__version__ = "0.1.0"
