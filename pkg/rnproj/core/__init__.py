"""Projection estimator, Carr-Madan benchmark and distribution recovery."""
