"""Pseudospectral laboratory for the semi-relativistic Hartree (boson star) equation.

Modules
-------
spectral_core     grids, transforms, Sobolev and mixed norms, dyadic cutoffs
propagator        free flow ``S_m(t)`` and initial data
solver            nonlinear evolution, conserved quantities, Picard iteration
dirac             Dirac-Hartree system split into half-wave components
estimates_lab     Strichartz, bilinear and trilinear sweeps over free waves
kernel_reduction  one-dimensional reduction of the delta-shell integral
variation_norms   discrete ``V^p`` norms and adapted proxies
cli               config-driven runner
"""

__version__ = "0.1.0"
