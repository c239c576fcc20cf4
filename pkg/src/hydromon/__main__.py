import sys

from hydromon.service.cli import main

sys.exit(main())
