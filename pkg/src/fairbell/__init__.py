"""Postselected CHSH-Bell experiments under loss."""

__version__ = "0.1.0"
