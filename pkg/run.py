"""
Command Entry Point

This is the main entry point for running the dabformer commands from a
source checkout, e.g. ``python run.py verify``.
"""

import sys

from dabformer.cli import main

if __name__ == "__main__":
    sys.exit(main())
