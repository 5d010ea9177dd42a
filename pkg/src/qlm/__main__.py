import sys

from qlm.cli import main

sys.exit(main())
