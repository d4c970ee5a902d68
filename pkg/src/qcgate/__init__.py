"""Simulation of controlled-Hamiltonian quantum gates."""
__version__ = "0.1.0"
