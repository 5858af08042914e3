"""Redfield/Lindblad audits and thermalization optimization for partially coupled spin chains."""

from qmetop.settings import Numerics, DEFAULT_NUMERICS

__all__ = ["Numerics", "DEFAULT_NUMERICS"]
__version__ = "0.1.0"
