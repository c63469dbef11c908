"""Numerical services: propagation, gradients, constraints, oracles, optimizer, profiles."""
