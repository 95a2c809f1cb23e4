"""Dense two-phase simplex with a Bland's-rule anti-cycling fallback, plus
CPLEX-LP text export.

Small and dependency-free on purpose: the worst-case design LPs have at most
a few dozen variables, and a transparent solver makes the optimum easy to
certify through its duality gap.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import NumericalFailure, SingularMatrix

FEAS_TOL = 1e-9
OPT_TOL = 1e-7


@dataclass
class LinearProgram:
    """minimize c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper."""

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: list[str] = field(default_factory=list)
    ub_names: list[str] = field(default_factory=list)
    eq_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        nv = len(self.c)
        self.c = np.asarray(self.c, dtype=float)
        self.a_ub = np.asarray(self.a_ub, dtype=float).reshape(-1, nv)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        self.a_eq = np.asarray(self.a_eq, dtype=float).reshape(-1, nv)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if not self.var_names:
            self.var_names = [f"x{i}" for i in range(nv)]
        if not self.ub_names:
            self.ub_names = [f"ub{i}" for i in range(len(self.b_ub))]
        if not self.eq_names:
            self.eq_names = [f"eq{i}" for i in range(len(self.b_eq))]

    @property
    def num_vars(self) -> int:
        return len(self.c)


@dataclass
class LpSolution:
    x: np.ndarray
    value: float
    duality_gap: float
    dual_infeasibility: float
    primal_infeasibility: float
    iterations: int


def _standard_form(lp: LinearProgram):
    """Rewrite as min c's x s.t. A x = b, x >= 0, b >= 0; returns a map back to lp's x."""
    nv = lp.num_vars
    cols = []  # (orig var, sign) per standard column
    shift = np.zeros(nv)
    for j in range(nv):
        lo, hi = lp.lower[j], lp.upper[j]
        if math.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
        elif math.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    k = len(cols)
    to_std = np.zeros((nv, k))
    for s, (j, sign) in enumerate(cols):
        to_std[j, s] = sign

    rows, rhs, slack_sign = [], [], []
    for a, b in zip(lp.a_ub, lp.b_ub):
        rows.append(a @ to_std)
        rhs.append(b - a @ shift)
        slack_sign.append(1.0)
    for j in range(nv):
        lo, hi = lp.lower[j], lp.upper[j]
        if math.isfinite(lo) and math.isfinite(hi):
            e = np.zeros(nv)
            e[j] = 1.0
            rows.append(e @ to_std)
            rhs.append(hi - lo)
            slack_sign.append(1.0)
    n_ineq = len(rows)
    for a, b in zip(lp.a_eq, lp.b_eq):
        rows.append(a @ to_std)
        rhs.append(b - a @ shift)
        slack_sign.append(0.0)

    m = len(rows)
    a_std = np.zeros((m, k + n_ineq))
    for i, r in enumerate(rows):
        a_std[i, :k] = r
        if i < n_ineq:
            a_std[i, k + i] = slack_sign[i]
    b_std = np.array(rhs, dtype=float)
    c_std = np.concatenate([lp.c @ to_std, np.zeros(n_ineq)])
    const = float(lp.c @ shift)
    flip = b_std < 0
    a_std[flip] *= -1
    b_std[flip] *= -1
    return a_std, b_std, c_std, const, to_std, shift, k


def _pivot(t: np.ndarray, basis: list[int], r: int, col: int) -> None:
    t[r] /= t[r, col]
    colv = t[:, col].copy()
    colv[r] = 0.0
    t -= np.outer(colv, t[r])
    basis[r] = col


def _refactor(t: np.ndarray, full: np.ndarray, rhs: np.ndarray, cost: np.ndarray, basis: list[int]) -> None:
    """Rebuild the tableau from the original data for the current basis."""
    try:
        body = numerics.solve(full[:, basis], np.column_stack([full, rhs]))
    except SingularMatrix as exc:
        raise NumericalFailure(f"basis became singular: {exc}") from exc
    t[:-1] = body
    t[-1] = np.r_[cost, 0.0] - cost[basis] @ body


def _run(
    t: np.ndarray,
    basis: list[int],
    full: np.ndarray,
    rhs: np.ndarray,
    cost: np.ndarray,
    tol: float,
    max_iter: int,
    refresh: int = 200,
    stall: int = 50,
) -> int:
    """Primal simplex on tableau ``t`` (last row = reduced costs, last col = rhs).

    Pricing is by the most negative reduced cost until ``stall`` consecutive
    degenerate pivots occur; from then on Bland's rule is used for the rest
    of the phase, which rules out cycling. The tableau is re-derived from
    ``full`` every ``refresh`` pivots and again before optimality is declared.
    """
    allowed = full.shape[1]
    it = since = degenerate = 0
    bland = False
    while True:
        red = t[-1, :allowed]
        enter = np.flatnonzero(red < -tol)
        if enter.size == 0:
            if since == 0:
                return it
            _refactor(t, full, rhs, cost, basis)
            since = 0
            continue
        col = int(enter[0]) if bland else int(enter[np.argmin(red[enter])])
        colv = t[:-1, col]
        pos = colv > tol
        if not pos.any():
            raise NumericalFailure(f"LP is unbounded along column {col}")
        ratios = np.full(colv.shape, np.inf)
        ratios[pos] = np.maximum(t[:-1, -1][pos], 0.0) / colv[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        if bland:
            r = int(min(ties, key=lambda i: basis[i]))
        else:
            r = int(ties[np.argmax(colv[ties])])
        degenerate = degenerate + 1 if best <= tol else 0
        if degenerate >= stall:
            bland = True
        _pivot(t, basis, r, col)
        it += 1
        since += 1
        if since >= refresh:
            _refactor(t, full, rhs, cost, basis)
            since = 0
        if it > max_iter:
            raise NumericalFailure(f"simplex exceeded {max_iter} iterations")


def simplex(lp: LinearProgram, tol: float = FEAS_TOL, max_iter: int = 200_000) -> LpSolution:
    """Solve ``lp`` to optimality; raises NumericalFailure when infeasible or unbounded."""
    a, b, c, const, to_std, shift, k = _standard_form(lp)
    m, ncols = a.shape
    # initial basis: the row's slack when it kept a +1 coefficient, else an artificial
    basis: list[int] = []
    art_rows = []
    for i in range(m):
        if k + i < ncols and a[i, k + i] == 1.0:
            basis.append(k + i)
        else:
            basis.append(-1)
            art_rows.append(i)
    n_art = len(art_rows)
    iters = 0
    if n_art:
        full = np.zeros((m, ncols + n_art))
        full[:, :ncols] = a
        for s, i in enumerate(art_rows):
            full[i, ncols + s] = 1.0
            basis[i] = ncols + s
        cost1 = np.r_[np.zeros(ncols), np.ones(n_art)]
        t = np.zeros((m + 1, ncols + n_art + 1))
        _refactor(t, full, b, cost1, basis)
        iters += _run(t, basis, full, b, cost1, tol, max_iter)
        if -t[-1, -1] > 1e3 * tol * max(1.0, float(np.abs(b).max(initial=0.0))):
            raise NumericalFailure(f"LP infeasible (phase-1 residual {-t[-1, -1]:.3e})")
        # drive leftover artificials out of the basis; drop redundant rows
        keep = []
        for r in range(m):
            if basis[r] >= ncols:
                nz = np.flatnonzero(np.abs(t[r, :ncols]) > 1e-7)
                if nz.size:
                    _pivot(t, basis, r, int(nz[np.argmax(np.abs(t[r, nz]))]))
                    keep.append(r)
            else:
                keep.append(r)
        basis = [basis[r] for r in keep]
        a = a[keep]
        b = b[keep]

    t = np.zeros((len(basis) + 1, ncols + 1))
    _refactor(t, a, b, c, basis)
    iters += _run(t, basis, a, b, c, tol, max_iter)

    # primal and dual from the final basis on the original data
    bmat = a[:, basis]
    try:
        xb = numerics.solve(bmat, b)
        y = numerics.solve(bmat.T, c[basis])
    except SingularMatrix as exc:
        raise NumericalFailure(f"final basis is singular: {exc}") from exc
    xs = np.zeros(ncols)
    xs[basis] = np.maximum(xb, 0.0)
    x = to_std @ xs[: to_std.shape[1]] + shift
    value = float(c @ xs) + const

    gap = abs(float(c @ xs) - float(b @ y))
    dual_inf = float(np.max(a.T @ y - c, initial=0.0))
    primal_inf = float(np.max(np.abs(a @ xs - b), initial=0.0))
    if dual_inf > OPT_TOL * 10 or gap > OPT_TOL * max(1.0, abs(value)):
        raise NumericalFailure(f"optimality not certified: gap {gap:.3e}, dual infeasibility {dual_inf:.3e}")
    return LpSolution(x, value, gap, dual_inf, primal_inf, iters)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _expr(coefs, names) -> str:
    terms = []
    for a, nm in zip(coefs, names):
        if a != 0.0:
            terms.append(f"{'-' if a < 0 else '+'} {_fmt(abs(a))} {nm}")
    return " ".join(terms) if terms else f"+ 0 {names[0]}"


def to_lp_format(lp: LinearProgram, title: str = "") -> str:
    """Render in CPLEX LP format with 17 significant digits."""
    out = []
    if title:
        out.append(f"\\ {title}")
    out += ["Minimize", f" obj: {_expr(lp.c, lp.var_names)}", "Subject To"]
    for nm, a, b in zip(lp.ub_names, lp.a_ub, lp.b_ub):
        out.append(f" {nm}: {_expr(a, lp.var_names)} <= {_fmt(b)}")
    for nm, a, b in zip(lp.eq_names, lp.a_eq, lp.b_eq):
        out.append(f" {nm}: {_expr(a, lp.var_names)} = {_fmt(b)}")
    out.append("Bounds")
    for nm, lo, hi in zip(lp.var_names, lp.lower, lp.upper):
        if not math.isfinite(lo) and not math.isfinite(hi):
            out.append(f" {nm} free")
        else:
            lo_s = _fmt(lo) if math.isfinite(lo) else "-inf"
            hi_s = _fmt(hi) if math.isfinite(hi) else "+inf"
            out.append(f" {lo_s} <= {nm} <= {hi_s}")
    out.append("End")
    return "\n".join(out) + "\n"


_TERM = re.compile(r"([+-])\s*([0-9.eE+-]+)\s+([A-Za-z_][A-Za-z0-9_]*)")
_SECTIONS = ("Minimize", "Subject To", "Bounds", "End")


def parse_lp_format(text: str) -> LinearProgram:
    """Read back what ``to_lp_format`` writes; raises ValueError on structural problems."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("\\")]
    heads = [ln for ln in lines if ln in _SECTIONS]
    if heads != list(_SECTIONS):
        raise ValueError(f"expected sections {_SECTIONS}, found {heads}")
    sec = None
    obj: dict[str, float] = {}
    rows: list[tuple[str, dict[str, float], str, float]] = []
    bounds: dict[str, tuple[float, float]] = {}
    order: list[str] = []

    def parse_terms(s):
        terms = {}
        for sign, num, nm in _TERM.findall(s):
            terms[nm] = (-1.0 if sign == "-" else 1.0) * float(num)
            if nm not in order:
                order.append(nm)
        return terms

    for ln in lines:
        if ln in _SECTIONS:
            sec = ln
            continue
        if sec == "Minimize":
            obj = parse_terms(ln.split(":", 1)[1])
        elif sec == "Subject To":
            name, body = ln.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)$", body.strip())
            if not m:
                raise ValueError(f"malformed constraint row: {ln}")
            rows.append((name.strip(), parse_terms(m.group(1)), m.group(2), float(m.group(3))))
        elif sec == "Bounds":
            if ln.endswith(" free"):
                bounds[ln[:-5].strip()] = (-math.inf, math.inf)
            else:
                lo, nm, hi = [s.strip() for s in ln.split("<=")]
                bounds[nm] = (float(lo), float(hi))
        elif sec == "End":
            raise ValueError("content after End")
    names = order + [nm for nm in bounds if nm not in order]
    idx = {nm: i for i, nm in enumerate(names)}

    def vec(terms):
        v = np.zeros(len(names))
        for nm, a in terms.items():
            v[idx[nm]] = a
        return v

    ub = [(nm, vec(t), b) for nm, t, s, b in rows if s == "<="]
    ub += [(nm, -vec(t), -b) for nm, t, s, b in rows if s == ">="]
    eq = [(nm, vec(t), b) for nm, t, s, b in rows if s == "="]
    lo = np.array([bounds.get(nm, (0.0, math.inf))[0] for nm in names])
    hi = np.array([bounds.get(nm, (0.0, math.inf))[1] for nm in names])
    nv = len(names)
    return LinearProgram(
        vec(obj),
        np.array([r[1] for r in ub]).reshape(-1, nv),
        np.array([r[2] for r in ub]),
        np.array([r[1] for r in eq]).reshape(-1, nv),
        np.array([r[2] for r in eq]),
        lo,
        hi,
        names,
        [r[0] for r in ub],
        [r[0] for r in eq],
    )
