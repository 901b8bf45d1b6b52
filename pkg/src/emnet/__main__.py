import sys

from emnet.cli import main

sys.exit(main())
