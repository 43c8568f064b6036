#!/usr/bin/env python3
"""Run the acceptance battery and write its artifacts.

Usage: python scripts/run_acceptance.py [output_root]
"""

import sys

from heatlab.cli import main

if __name__ == "__main__":
    root = sys.argv[1] if len(sys.argv) > 1 else "results"
    sys.exit(main(["acceptance", "--output-root", root]))
