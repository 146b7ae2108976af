import sys

from replidyn.cli_io.main import main

sys.exit(main())
