import sys

from noise_eval.cli import main

sys.exit(main())
