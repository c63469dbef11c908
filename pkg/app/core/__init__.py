"""Core application configuration and constants."""
