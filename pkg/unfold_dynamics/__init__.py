"""unfold_dynamics package

Dynamics of one-parameter unfoldings of tangent-to-identity diffeomorphisms:
dynamical splittings, stable directions, Fatou coordinates and horn maps.
"""
__version__ = "0.1.0"
