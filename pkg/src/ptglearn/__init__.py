"""Learnability analysis and experiment design for Pauli noise on Clifford circuits."""
