"""Honeycomb photonic media toolkit.

Computes Floquet-Bloch band structures of 2D divergence-form elliptic
operators with honeycomb symmetry, locates Dirac points and extracts the
effective coefficients (Fermi velocity, mass coefficient), simulates the
effective Dirac equation with a varying mass (including edge transport
along domain walls), and validates the envelope approximation against the
full 2D wave equation on periodic supercells.
"""

__version__ = "0.1.0"
