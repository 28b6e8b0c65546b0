# sntool/__init__.py
"""Stochastic Newton solvers (SAN, SANA, SAN-id, SNM) and SAG/SVRG baselines for regularized GLMs."""

__version__ = "0.1.0"
