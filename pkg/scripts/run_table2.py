"""k=3, r=3 study with reference comparison."""

import sys

from _common import study

if __name__ == "__main__":
    sys.exit(study(__doc__, k=3, r=3, levels=3))
