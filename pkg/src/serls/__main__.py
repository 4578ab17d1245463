import sys

from serls.cli import main

sys.exit(main())
