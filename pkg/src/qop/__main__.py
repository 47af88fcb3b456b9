import sys

from qop.cli import main

sys.exit(main())
