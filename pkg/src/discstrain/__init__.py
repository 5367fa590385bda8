"""Plane-stress Rankine plasticity with damage and a reversible discontinuity strain.

Subpackages and modules:

``tensor2d``
    symmetric 2x2 tensors, spectral split, plane-stress elasticity
``constitutive``
    the material kernel (return map, crack inception/closure, tangent)
``oracle``
    closed-form uniaxial reference and mixed-control driver
``matpoint``
    strain-path drivers for single material points
``fem``
    linear elements, assembly and displacement-controlled Newton solver
``scenarios``
    notched-beam and double-edge-notch benchmark generators
``cli``
    command line front end (``discstrain``)
"""
from .constitutive import MaterialParams, MaterialState, Regime, update, virgin_state
from .tensor2d import ElasticOperator, SymTensor2

__all__ = ["MaterialParams", "MaterialState", "Regime", "update", "virgin_state", "ElasticOperator", "SymTensor2"]
__version__ = "0.1.0"
