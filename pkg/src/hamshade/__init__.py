"""Numerical probes of Hamiltonian flows: transversal linear Poincare flow,
spectra and splittings, and shadowing-type properties."""

__version__ = "0.1.0"
