"""Resonance index theory for self-adjoint pencils H_s = H_0 + sV, in finite
dimensions and for continuum models with an embedded eigenvalue."""

__version__ = "0.1.0"
