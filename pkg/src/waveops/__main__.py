import sys

from waveops.cli import main

sys.exit(main())
