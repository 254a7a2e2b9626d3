"""brinkhom: Stokes-Brinkman homogenization toolkit for critically
perforated domains (hole size ~ eps^3 on an eps lattice)."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
