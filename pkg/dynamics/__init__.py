"""Switched affine dynamics and their flows."""
