#!/usr/bin/env python3
"""
dephase-lab
Main entry point for the dephasing-approach linear optics toolkit
"""

import os
import sys

# Make the package importable when run from a checkout
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from dephase_lab.cli import main

if __name__ == "__main__":
    sys.exit(main())
