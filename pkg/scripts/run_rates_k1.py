"""Lowest-order k=1, r=1 study (no reference table)."""

import sys

from _common import study

if __name__ == "__main__":
    sys.exit(study(__doc__, k=1, r=1, levels=4))
