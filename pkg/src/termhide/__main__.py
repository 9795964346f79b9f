import sys

from termhide.cli import main

sys.exit(main())
