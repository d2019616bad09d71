"""k=2, r=2 study with reference comparison."""

import sys

from _common import study

if __name__ == "__main__":
    sys.exit(study(__doc__, k=2, r=2, levels=4))
