"""Lattice quantization and finite symbolic models of sampled switched systems."""
