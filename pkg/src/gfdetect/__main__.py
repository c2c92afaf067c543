import sys

from gfdetect.cli import main

sys.exit(main())
