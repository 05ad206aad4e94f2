import sys

from .plots import main

sys.exit(main())
