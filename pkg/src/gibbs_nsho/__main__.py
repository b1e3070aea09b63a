"""Allow ``python -m gibbs_nsho``."""

import sys

from .cli import main

sys.exit(main())
