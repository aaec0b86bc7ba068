"""
Q-curvature numerics
Conformal transfer, Paneitz spectra, Riesz kernels, Moser-Trudinger-Adams checks and a radial existence solver
"""

__version__ = "0.1.0"
