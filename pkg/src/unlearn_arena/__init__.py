"""Desk-scale evaluation arena for machine unlearning.

Trains small models, applies published unlearning methods, and measures
whether an adversary can tell unlearned models from retrained controls.
"""

__version__ = "0.1.0"
