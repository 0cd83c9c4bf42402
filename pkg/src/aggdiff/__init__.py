"""Numerical laboratory for aggregation-diffusion free energies.

The objects of study are radially symmetric densities u >= 0 on R^d
(d = 2 or 3) together with free energies of the form

    F(u) = S(u) - W(u)/2
         = int Phi(u(x)) dx - 1/2 int int u(x) K(x - y) u(y) dx dy,

with Phi convex (degenerate diffusion) and K >= 0 radially symmetric
and nonincreasing (attractive self-interaction).  The package provides
grids and profiles, a catalog of kernels and entropy laws, discrete
energy evaluation, symmetric decreasing rearrangement, criticality
classification, and two minimization schemes, plus a CLI and an HTTP
service wrapping the same machinery.
"""

__version__ = "0.1.0"
