import sys

from heart_cohorts.cli import main

sys.exit(main())
