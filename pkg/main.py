#!/usr/bin/env python3
"""
exciton-control - Controlled Energy Transfer Simulator

Main entry point; same subcommands as the installed ``exciton-control`` script.

    python main.py list-presets
    python main.py run --preset lens_chain --out results/lens_chain
"""

import sys

from exciton_control.cli import main

if __name__ == '__main__':
    sys.exit(main())
