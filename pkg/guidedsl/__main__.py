import sys

from guidedsl.cli import main

sys.exit(main())
