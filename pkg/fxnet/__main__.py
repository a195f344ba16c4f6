import sys

from fxnet.cli import main

sys.exit(main())
