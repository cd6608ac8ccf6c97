"""Probabilistically shaped coded modulation with staircase codes and hard decisions."""

__version__ = "0.1.0"
