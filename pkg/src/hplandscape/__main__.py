import sys

from hplandscape.cli import main

sys.exit(main())
