"""Node superconvergence study, k=3, r=5."""

import sys

from _common import study

if __name__ == "__main__":
    sys.exit(study(__doc__, k=3, r=5, levels=3))
