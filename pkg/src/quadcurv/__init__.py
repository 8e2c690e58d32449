"""Numerical toolkit for quadratic curvature functionals on glued
Einstein four-manifolds.

Subpackages follow the computational pipeline:

    tensor_core      exact 4d tensor algebra (curvature decompositions,
                     two-form bases, Weyl contractions)
    charts           explicit coordinate charts for the building-block
                     metrics and their conformal blow-ups
    curvature_engine metric derivatives -> curvature bundles, plus the
                     differential operators used in the verification suites
    greens           conformal-Laplacian Green's functions and AF masses
    gluing           approximate glued metrics, decay scans, critical
                     parameter values and the published tables
    cli              batch front end with caching
"""

__version__ = "0.1.0"
