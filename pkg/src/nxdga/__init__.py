"""Streaming NXDomain analysis for wordlist-based DGA detection."""

__version__ = "0.1.0"
