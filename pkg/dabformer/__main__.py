"""Allows ``python -m dabformer``"""

import sys

from dabformer.cli import main

sys.exit(main())
