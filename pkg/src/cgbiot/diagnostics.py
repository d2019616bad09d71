"""Space-time error norms, convergence orders and error reports."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fe_space import CellQuadrature, FeSpace
from .quadrature import gauss_legendre, gauss_lobatto
from .slab_solver import Trajectory
from .time_basis import lagrange_matrix

QUANTITIES = ("grad_u", "v", "p")
NORMS = ("L2L2", "LinfL2", "linfL2")
ALL_WHICH = ("u", "grad_u", "v", "p")

NORM_LABELS = {"L2L2": "L2(L2)", "LinfL2": "Linf(L2)", "linfL2": "linf(L2)"}
QTY_LABELS = {"grad_u": "grad(u - u_h)", "v": "v - v_h", "p": "p - p_h", "u": "u - u_h"}


class ErrorEvaluator:
    """Squared spatial errors of a trajectory against exact fields.

    ``exact.exact_fields(x1, x2, t)`` must return an object with ``u``,
    ``grad_u``, ``v`` and ``p`` attributes (tuples for vector fields).
    Spatial integrals use ``s+2`` Gauss points per direction on every cell.
    """

    def __init__(self, traj: Trajectory, space_u: FeSpace, space_p: FeSpace, exact,
                 chunk: int = 25):
        self.traj, self.exact, self.chunk = traj, exact, chunk
        self.space_u, self.space_p = space_u, space_p
        self.cq_u = CellQuadrature(space_u, space_u.degree + 2)
        self.cq_p = CellQuadrature(space_p, space_p.degree + 2)

    def _discrete_at_nodes(self, n: int):
        nu = self.space_u.n_dofs
        U, V, P = self.traj.u[n], self.traj.v[n], self.traj.p[n]
        cu = self.cq_u
        out = {
            "u": [cu.values(U[:, c * nu:(c + 1) * nu]) for c in range(2)],
            "v": [cu.values(V[:, c * nu:(c + 1) * nu]) for c in range(2)],
            "p": self.cq_p.values(P),
        }
        out["grad_u"] = [list(cu.gradients(U[:, c * nu:(c + 1) * nu])) for c in range(2)]
        return out

    def slab_squared(self, n: int, t, which=ALL_WHICH) -> dict:
        """``{which: array over t}`` of squared L2(Omega) errors on slab ``n``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = self.traj.partition.to_reference(n, t)
        L = lagrange_matrix(gauss_lobatto(self.traj.k + 1).nodes, s)
        nodal = self._discrete_at_nodes(n)
        cu, cp = self.cq_u, self.cq_p
        res = {w: np.empty(t.size) for w in which}
        for lo in range(0, t.size, self.chunk):
            sl = slice(lo, lo + self.chunk)
            Lc = L[sl]
            tt = t[sl][:, None, None]

            def comb(a):
                return np.einsum("mj,jcq->mcq", Lc, a)

            if set(which) & {"u", "grad_u", "v"}:
                ex = self.exact.exact_fields(cu.x1, cu.x2, tt)
            if "p" in which:
                exp_ = self.exact.exact_fields(cp.x1, cp.x2, tt)
                res["p"][sl] = cp.integrate((exp_.p - comb(nodal["p"])) ** 2)
            for name in ("u", "v"):
                if name in which:
                    e2 = sum((getattr(ex, name)[c] - comb(nodal[name][c])) ** 2 for c in range(2))
                    res[name][sl] = cu.integrate(e2)
            if "grad_u" in which:
                e2 = sum((ex.grad_u[c][d] - comb(nodal["grad_u"][c][d])) ** 2
                         for c in range(2) for d in range(2))
                res["grad_u"][sl] = cu.integrate(e2)
        return res

    def _map(self, fn, threads: int):
        N = self.traj.n_slabs
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                return list(pool.map(fn, range(N)))
        return [fn(n) for n in range(N)]

    def all_norms(self, M: int = 100, n_time_quad: int = 5, which=QUANTITIES,
                  threads: int = 1) -> dict:
        """All three space-time norms for each quantity in one sweep over slabs."""
        part = self.traj.partition
        g_int = gauss_legendre(n_time_quad)
        g_max = gauss_legendre(M)

        def per_slab(n):
            a, b = part.slab(n)
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            sq_int = self.slab_squared(n, mid + half * g_int.nodes, which)
            sq_max = self.slab_squared(n, mid + half * g_max.nodes, which)
            sq_node = self.slab_squared(n, [b], which)
            return ({w: half * (g_int.weights @ sq_int[w]) for w in which},
                    {w: sq_max[w].max() for w in which},
                    {w: sq_node[w][0] for w in which})

        parts = self._map(per_slab, threads)
        out = {}
        for w in which:
            out[f"L2L2:{w}"] = math.sqrt(max(sum(p[0][w] for p in parts), 0.0))
            out[f"LinfL2:{w}"] = math.sqrt(max(max(p[1][w] for p in parts), 0.0))
            out[f"linfL2:{w}"] = math.sqrt(max(max(p[2][w] for p in parts), 0.0))
        return out


def spatial_error_at_time(ev: ErrorEvaluator, t: float, which: str) -> float:
    part = ev.traj.partition
    if t < part.t_start - 1e-14 or t > part.t_end + 1e-14:
        raise ValueError(f"t={t} outside the time interval")
    n = part.locate(t)
    return math.sqrt(max(ev.slab_squared(n, [t], (which,))[which][0], 0.0))


def l2_l2_error(ev: ErrorEvaluator, which: str, n_time_quad: int = 5) -> float:
    g = gauss_legendre(n_time_quad)
    total = 0.0
    for n in range(ev.traj.n_slabs):
        a, b = ev.traj.partition.slab(n)
        sq = ev.slab_squared(n, 0.5 * (a + b) + 0.5 * (b - a) * g.nodes, (which,))[which]
        total += 0.5 * (b - a) * (g.weights @ sq)
    return math.sqrt(max(total, 0.0))


def linf_l2_error(ev: ErrorEvaluator, which: str, M: int = 100) -> float:
    if M < 1:
        raise ValueError("M must be >= 1")
    g = gauss_legendre(M)
    worst = 0.0
    for n in range(ev.traj.n_slabs):
        a, b = ev.traj.partition.slab(n)
        sq = ev.slab_squared(n, 0.5 * (a + b) + 0.5 * (b - a) * g.nodes, (which,))[which]
        worst = max(worst, sq.max())
    return math.sqrt(max(worst, 0.0))


def node_linf_error(ev: ErrorEvaluator, which: str) -> float:
    worst = 0.0
    for n in range(ev.traj.n_slabs):
        _, b = ev.traj.partition.slab(n)
        worst = max(worst, ev.slab_squared(n, [b], (which,))[which][0])
    return math.sqrt(max(worst, 0.0))


def eoc(error_coarse: float, error_fine: float) -> float:
    """Observed order between two levels with halved (tau, h)."""
    if error_coarse <= 0 or error_fine <= 0:
        raise ValueError("errors must be positive to compute an order")
    return math.log2(error_coarse / error_fine)


@dataclass
class LevelErrors:
    level: int
    tau: float
    h: float
    errors: dict[str, float] = field(default_factory=dict)


@dataclass
class ErrorReport:
    k: int
    r: int
    levels: list[LevelErrors] = field(default_factory=list)
    notes: dict[str, str] = field(default_factory=dict)

    def column(self, norm: str, qty: str) -> list[float]:
        return [lv.errors[f"{norm}:{qty}"] for lv in self.levels]

    def eocs(self, norm: str, qty: str) -> list[float | None]:
        col = self.column(norm, qty)
        return [None] + [eoc(a, b) for a, b in zip(col, col[1:])]

    def keys(self) -> list[str]:
        seen = []
        for lv in self.levels:
            for key in lv.errors:
                if key not in seen:
                    seen.append(key)
        return seen

    def to_csv(self) -> str:
        """Full-precision CSV of every stored error (lossless round trip)."""
        buf = io.StringIO()
        buf.write(f"# k={self.k} r={self.r}\n")
        for key, val in self.notes.items():
            buf.write(f"# {key}={val}\n")
        keys = self.keys()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "tau", "h"] + keys)
        for lv in self.levels:
            w.writerow([lv.level, repr(float(lv.tau)), repr(float(lv.h))] + [repr(float(lv.errors[k])) for k in keys])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ErrorReport":
        lines = text.splitlines()
        meta, notes = {}, {}
        body = []
        for line in lines:
            if line.startswith("# k="):
                meta = dict(item.split("=") for item in line[2:].split())
            elif line.startswith("# "):
                key, _, val = line[2:].partition("=")
                notes[key] = val
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
        header, data = rows[0], rows[1:]
        report = cls(int(meta["k"]), int(meta["r"]), notes=notes)
        for row in data:
            errs = {key: float(val) for key, val in zip(header[3:], row[3:])}
            report.levels.append(LevelErrors(int(row[0]), float(row[1]), float(row[2]), errs))
        return report


def _fmt_eoc(x):
    return "--" if x is None else f"{x:.2f}"


def table_rows(report: ErrorReport, norm: str):
    header = ["tau", "h"]
    for q in QUANTITIES:
        header += [f"||{QTY_LABELS[q]}||_{NORM_LABELS[norm]}", "EOC"]
    eocs = {q: report.eocs(norm, q) for q in QUANTITIES}
    rows = []
    for i, lv in enumerate(report.levels):
        row = [f"{lv.tau:.10e}", f"{lv.h:.10e}"]
        for q in QUANTITIES:
            row += [f"{lv.errors[f'{norm}:{q}']:.10e}", _fmt_eoc(eocs[q][i])]
        rows.append(row)
    return header, rows


def emit_table(report: ErrorReport, fmt: str = "md", norms=None, path=None) -> str:
    """Convergence tables (tau, h, then error/EOC pairs) as markdown or CSV."""
    if not report.levels:
        raise ValueError("cannot emit an empty report")
    if norms is None:
        norms = [n for n in NORMS if f"{n}:grad_u" in report.levels[0].errors]
    out = io.StringIO()
    for norm in norms:
        header, rows = table_rows(report, norm)
        if fmt == "md":
            out.write(f"\n**{NORM_LABELS[norm]} errors, k={report.k}, r={report.r}**\n\n")
            out.write("| " + " | ".join(header) + " |\n")
            out.write("|" + "---|" * len(header) + "\n")
            for row in rows:
                out.write("| " + " | ".join(row) + " |\n")
        elif fmt == "csv":
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["norm"] + header)
            for row in rows:
                w.writerow([norm] + row)
        else:
            raise ValueError(f"unknown table format {fmt!r}")
    text = out.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
