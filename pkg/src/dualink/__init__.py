"""Dual powerline/wireless OFDM link simulator with LLR-domain diversity
combining and a Monte-Carlo BER harness."""

__version__ = "0.1.0"
