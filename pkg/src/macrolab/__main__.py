"""Run the command line interface with `python -m macrolab`."""

import sys

from .cli import main

sys.exit(main())
