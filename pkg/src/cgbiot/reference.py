"""Reference errors for the manufactured test case and the checks against them.

Rows are refinement levels 0..3 (tau0 = 0.05, n0 = 4); columns are the
``grad_u``, ``v`` and ``p`` errors.  EOC entries are as printed (2 digits).
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagnostics import QUANTITIES, ErrorReport

TABLES = {
    (2, 2): {
        "L2L2": {
            "errors": [
                (3.7772346728e-03, 4.4831153608e-03, 1.3925593715e-03),
                (4.7293499671e-04, 5.6200459009e-04, 1.7624666295e-04),
                (5.9118396929e-05, 7.0409147572e-05, 2.2094955372e-05),
                (7.3894810579e-06, 8.8070050157e-06, 2.7638964740e-06),
            ],
            "eoc": [(3.00, 3.00, 2.98), (3.00, 3.00, 3.00), (3.00, 3.00, 3.00)],
        },
        "LinfL2": {
            "errors": [
                (5.5609986126e-03, 1.4388258226e-02, 1.9457909519e-03),
                (7.3872532490e-04, 1.8026863849e-03, 2.4740005168e-04),
                (9.4556857326e-05, 2.2667403592e-04, 3.0867702485e-05),
                (1.1925250119e-05, 2.8448677188e-05, 3.8601048383e-06),
            ],
            "eoc": [(2.91, 3.00, 2.98), (2.97, 2.99, 3.00), (2.99, 2.99, 3.00)],
        },
    },
    (3, 3): {
        "L2L2": {
            "errors": [
                (1.7724800037e-04, 1.5572598126e-04, 6.2865996817e-05),
                (1.1068826736e-05, 9.0324299079e-06, 3.9664381213e-06),
                (6.9153355647e-07, 5.5554036618e-07, 2.4851816029e-07),
                (4.3215752542e-08, 3.4586146527e-08, 1.5542077250e-08),
            ],
            "eoc": [(4.00, 4.11, 3.99), (4.00, 4.02, 4.00), (4.00, 4.01, 4.00)],
        },
        "LinfL2": {
            "errors": [
                (3.0383309559e-04, 5.7065321892e-04, 9.3580580659e-05),
                (1.9175723302e-05, 3.8885259584e-05, 5.8271904381e-06),
                (1.1977037979e-06, 2.5396723780e-06, 3.6728075814e-07),
                (7.4962458146e-08, 1.6227333767e-07, 2.3002686673e-08),
            ],
            "eoc": [(3.99, 3.88, 4.01), (4.00, 3.94, 3.99), (4.00, 3.97, 4.00)],
        },
    },
    (3, 5): {
        "L2L2": {
            "errors": [
                (5.8117734426e-05, 1.5347090551e-04, 9.3413974336e-06),
                (3.6198825671e-06, 8.9954777890e-06, 5.7613608543e-07),
                (2.2603227629e-07, 5.5496215896e-07, 3.5977539073e-08),
                (1.4123671689e-08, 3.4577094422e-08, 2.2483070160e-09),
            ],
            "eoc": [(4.00, 4.09, 4.02), (4.00, 4.02, 4.00), (4.00, 4.00, 4.00)],
        },
        "linfL2": {
            "errors": [
                (1.1089049623e-05, 1.4804895672e-04, 1.0389805110e-05),
                (1.4735513623e-07, 2.1095147908e-06, 1.2944103974e-07),
                (2.3655340792e-09, 3.3680209502e-08, 2.1560790646e-09),
                (3.6038421330e-11, 5.2092447939e-10, 3.3031484852e-11),
            ],
            "eoc": [(6.23, 6.13, 6.33), (5.96, 5.97, 5.91), (6.04, 6.01, 6.03)],
        },
    },
}


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass(frozen=True)
class Tolerances:
    rel_error: float | None = 0.25
    eoc_abs: float | None = None  # |eoc - printed| bound
    eoc_target: tuple[float, float] | None = None  # fixed window (lo, hi)


# per (k, r) and norm; windows follow the acceptance criteria
TOLERANCES = {
    (2, 2): {"L2L2": Tolerances(0.25, eoc_abs=0.10), "LinfL2": Tolerances(0.25, eoc_abs=0.10)},
    (3, 3): {"L2L2": Tolerances(0.25, eoc_target=(3.85, 4.15)),
             "LinfL2": Tolerances(0.25, eoc_target=(3.85, 4.15))},
    (3, 5): {"L2L2": Tolerances(None, eoc_target=(3.85, 4.15)),
             "linfL2": Tolerances(None, eoc_target=(5.7, 6.5))},
}


def compare_with_reference(report: ErrorReport) -> list[Check]:
    """Checks of every available level/column against the embedded tables."""
    key = (report.k, report.r)
    if key not in TABLES:
        return []
    checks = []
    for norm, ref in TABLES[key].items():
        if f"{norm}:grad_u" not in report.levels[0].errors:
            continue
        tol = TOLERANCES[key][norm]
        for qi, q in enumerate(QUANTITIES):
            col = report.column(norm, q)
            eocs = report.eocs(norm, q)
            for lvl, val in enumerate(col[: len(ref["errors"])]):
                if tol.rel_error is not None:
                    want = ref["errors"][lvl][qi]
                    rel = abs(val - want) / want
                    checks.append(Check(f"{norm} {q} level {lvl}", rel <= tol.rel_error,
                                        f"{val:.4e} vs {want:.4e} (rel {rel:.3f}, tol {tol.rel_error})"))
                if lvl == 0:
                    continue
                got = eocs[lvl]
                printed = ref["eoc"][lvl - 1][qi]
                if tol.eoc_abs is not None:
                    ok = abs(got - printed) <= tol.eoc_abs
                    what = f"EOC {got:.3f} vs {printed:.2f} (+-{tol.eoc_abs})"
                else:
                    lo, hi = tol.eoc_target
                    ok = lo <= got <= hi
                    what = f"EOC {got:.3f} in [{lo}, {hi}] (printed {printed:.2f})"
                checks.append(Check(f"{norm} {q} EOC {lvl - 1}->{lvl}", ok, what))
    return checks
