import sys

from cavity_spin.cli import main

sys.exit(main())
