import sys

from corrqpt.cli import main

sys.exit(main())
