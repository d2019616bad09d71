"""Property suite; pass ``--fault`` to flip the sign of the coupling term."""

import argparse
import sys
import time

from cgbiot.runner import verify_properties

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fault", action="store_true")
    args = parser.parse_args()
    start = time.perf_counter()
    checks = verify_properties(coupling_sign=-1.0 if args.fault else 1.0)
    for c in checks:
        print(c.line())
    print(f"{time.perf_counter() - start:.1f}s")
    sys.exit(0 if all(c.passed for c in checks) else 3)
