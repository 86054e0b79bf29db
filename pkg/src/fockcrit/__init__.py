"""Entanglement criteria from particle-number and interference variances."""
