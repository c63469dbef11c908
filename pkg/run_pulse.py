#!/usr/bin/env python
"""Launcher for the pulse command line without installing the package."""
import sys

from app.main import main

if __name__ == "__main__":
    sys.exit(main())
