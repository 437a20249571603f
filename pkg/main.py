"""
Main entry point for the textual grounding command line
"""

import os
import sys

# Add parent directory to path for more reliable imports
current_dir = os.path.dirname(os.path.abspath(__file__))
if current_dir not in sys.path:
    sys.path.insert(0, current_dir)

from src.cli import main as cli_main


def main():
    """Run the ground command and exit with its status"""
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
