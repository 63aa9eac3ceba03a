#!/usr/bin/env python3
"""
Command-line entry point for the densification pipeline
"""
import sys
import os

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))

from vadgs.cli import main

if __name__ == "__main__":
    sys.exit(main())
