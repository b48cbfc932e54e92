import sys

from provauth.cli import main

sys.exit(main())
