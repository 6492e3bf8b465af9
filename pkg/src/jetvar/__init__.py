"""Symbolic variational calculus on jet spaces."""
