"""Desk-scale lab for targeted adversarial attacks on deep hashing retrieval."""

__version__ = "0.1.0"
