import sys

from flatplan.cli import main

sys.exit(main())
