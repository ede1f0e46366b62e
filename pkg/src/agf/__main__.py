import sys

from agf.cli import main

sys.exit(main())
