import sys

from fermikin.cli import main

sys.exit(main())
