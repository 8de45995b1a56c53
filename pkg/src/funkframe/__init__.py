"""Funk-Radon transform, its trigonometric frame decomposition and regularized inversion."""
