"""Circuit simulator and verification lab for generalized probabilistic theories."""

__version__ = "0.1.0"
