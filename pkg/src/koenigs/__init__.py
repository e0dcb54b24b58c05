"""Iteration, Denjoy-Wolff classification and Koenigs linearisation of disc self-maps."""

__version__ = "0.1.0"
