import sys

from rankjoin.cli import main

sys.exit(main())
