"""Numerical laboratory for spectral clusters on the disk and the
wave-packet parametrix machinery used to bound them.

Submodules
----------
geometry      boundary-normal metric models, extensions, symbol p
diskspec      Bessel modes of the unit disk, clusters, L^q growth
restriction   extension operator for arcs of the circle
wavepacket    windowed transform T_mu, its adjoint and kernels
hamflow       Hamiltonian flow of the rescaled symbol and Jacobians
dyadic        angular and radial Littlewood-Paley cutoffs
kernel_lab    the WW* kernel, Schur row masses, weighted convolution
fitting       log-log slope fits and exact exponent targets
cli           experiment driver
"""

__version__ = "0.1.0"

from .fitting import ExponentFit, exponent_target, fit_slope, fit_loglog

__all__ = ["ExponentFit", "exponent_target", "fit_slope", "fit_loglog", "__version__"]
