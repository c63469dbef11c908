"""Bloch pulse designer - exact-gradient optimal control for single spin-1/2 pulses."""
