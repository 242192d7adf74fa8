"""
Entry point for running qrouter-sim as a module or via uvx
"""

from qrouter_sim.cli import app


def main():
    app()


if __name__ == "__main__":
    main()
