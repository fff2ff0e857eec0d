import sys

from onoffnet.cli import main

sys.exit(main())
