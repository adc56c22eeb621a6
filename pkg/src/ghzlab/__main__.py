import sys

from ghzlab.cli import main

sys.exit(main())
