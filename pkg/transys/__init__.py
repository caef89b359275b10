"""Finite metric transition systems, approximate bisimulation and relation certificates."""
