"""Feedback-controlled blowup of the semilinear heat equation."""

__version__ = "0.1.0"
