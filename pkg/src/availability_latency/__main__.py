"""Module execution: ``python -m availability_latency <experiment> [flags]``."""

from .service import main

if __name__ == "__main__":
    main()
