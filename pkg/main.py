"""
DualStyle - Main Entry Point
Run `python main.py --help` for the command list.
"""

import sys

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
