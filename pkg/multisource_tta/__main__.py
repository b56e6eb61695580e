#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
import sys

from multisource_tta.cli import main

if __name__ == "__main__":
    sys.exit(main())
