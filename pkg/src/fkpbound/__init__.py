"""Partial-order SMT encodings of the fkp2013 family and a checker for its N! lower bound."""

__version__ = "0.1.0"
