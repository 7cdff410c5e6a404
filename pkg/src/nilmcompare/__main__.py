import sys

from nilmcompare.cli import main

sys.exit(main())
