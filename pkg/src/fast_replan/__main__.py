import sys

from fast_replan.pipeline.cli import main

if __name__ == "__main__":
    sys.exit(main())
