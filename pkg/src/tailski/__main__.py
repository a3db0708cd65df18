import sys

from tailski.cli import main

sys.exit(main())
