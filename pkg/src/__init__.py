"""
qi-lab: finite-scale experiments on quasi-isometric distortion of hyperbolic spaces
"""

__version__ = "0.3.0"
