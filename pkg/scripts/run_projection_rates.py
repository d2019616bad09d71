"""Observed convergence rates of the scalar and vector Ritz projections."""

from cgbiot.runner import projection_rates

if __name__ == "__main__":
    for r in (1, 2, 3):
        errs, rates = projection_rates(r, n0=4, refinements=3)
        print(f"r = {r}")
        print(f"  {'h':>12} {'|p-Rp|':>12} {'|grad(p-Rp)|':>14} {'|u-Ru|':>12}")
        for e in errs:
            print(f"  {e.h:12.4e} {e.scalar_l2:12.4e} {e.scalar_h1:14.4e} {e.vector_l2:12.4e}")
        for name, want in (("scalar_l2", r + 1), ("scalar_h1", r), ("vector_l2", r + 2)):
            print(f"  {name:10s} rates " + ", ".join(f"{x:.2f}" for x in rates[name]) + f"  (expected {want})")
