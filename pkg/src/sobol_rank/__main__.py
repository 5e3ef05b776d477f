import sys

from sobol_rank.cli import main

sys.exit(main())
