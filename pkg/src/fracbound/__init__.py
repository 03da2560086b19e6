"""Fractal trainability boundaries of gradient descent on perturbed quadratics."""

__version__ = "0.1.0"
