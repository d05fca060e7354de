#!/usr/bin/env python3
"""
PCOPO workbench
Below-threshold quantum correlations and stochastic simulation of an optical
parametric oscillator with an intracavity photonic crystal.
"""

import logging
import sys
from pathlib import Path

# Add the current directory to Python path for imports
sys.path.insert(0, str(Path(__file__).parent))

from pcopo.core import PcopoCLI


def setup_logging(level: int = logging.WARNING):
    """Setup logging configuration; logs go to stderr so stdout carries only results"""
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stderr)
        ]
    )


def main():
    """Main entry point for the PCOPO workbench CLI"""
    try:
        setup_logging()
        cli = PcopoCLI()
        sys.exit(cli.run())
    except KeyboardInterrupt:
        print("\n\nOperation cancelled by user.", file=sys.stderr)
        sys.exit(130)
    except Exception as e:
        logging.error(f"Unexpected error: {e}")
        print(f"An unexpected error occurred: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
