"""Robin p-Laplacian first-eigenvalue toolkit for star-shaped planar domains.

Subpackages: geometry (curves, frames, tangential calculus), meshing,
fem (P1 Rayleigh-quotient eigensolver), radial (ball shooting solver),
shape_derivative (boundary derivative formulas), validation
(finite-difference cross-checks), cli.
"""

__version__ = "0.1.0"
