# Copyright (c) NXAI GmbH.

import sys

from .cli import main

sys.exit(main())
