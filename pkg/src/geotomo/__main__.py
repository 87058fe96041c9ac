"""CLI entry point for geotomo."""

from geotomo.cli import main

if __name__ == "__main__":
    main()
