"""
main.py
Entry point of the mtlab command line tool.
"""

import sys

from src.runners.cli_runner import run


def main() -> None:
    """
    Run the requested subcommand and exit with its status code.
    """
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
