import sys

from dephase_lab.cli import main

sys.exit(main())
