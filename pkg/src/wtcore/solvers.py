"""Solver-agnostic LP, convex QP and 0/1 IP interface.

LPs and IPs go to HiGHS through :mod:`scipy.optimize`; strictly convex QPs go
to quadprog (Goldfarb-Idnani dual active set), which returns solutions exact to
machine precision on the final active set. Every optimal answer is re-checked
against the original program by :func:`residuals` before it is returned, and QP
answers additionally pass a KKT check.
"""
from __future__ import annotations

import itertools
import logging
import math
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp, nnls

from .model import EPS

log = logging.getLogger(__name__)

SENSES = ("<=", ">=", "=")


class SpecError(ValueError):
    """The program handed to a solver is malformed."""


class SolverError(RuntimeError):
    """The backend failed or returned an answer that does not check out."""


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(kw_only=True)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    maximize: bool = False
    names: Optional[tuple[str, ...]] = None

    @property
    def num_vars(self) -> int:
        return len(self.c)

    def validate(self) -> None:
        n = len(self.c)
        if self.A.ndim != 2 or self.A.shape[1] != n:
            raise SpecError(f"constraint matrix has shape {self.A.shape}, expected (m, {n})")
        m = self.A.shape[0]
        if len(self.senses) != m or len(self.b) != m:
            raise SpecError("senses/rhs length does not match the number of rows")
        if any(s not in SENSES for s in self.senses):
            raise SpecError(f"unknown sense in {self.senses}")
        if len(self.lb) != n or len(self.ub) != n:
            raise SpecError("bounds length does not match the number of variables")
        if np.any(self.lb > self.ub):
            raise SpecError("lower bound exceeds upper bound")
        if np.any(np.isnan(self.A)) or np.any(np.isnan(self.b)) or np.any(np.isnan(self.c)):
            raise SpecError("NaN in program data")
        if self.names is not None and len(self.names) != n:
            raise SpecError("names length does not match the number of variables")


@dataclass(kw_only=True)
class QuadraticProgram(LinearProgram):
    """Minimize ``sum(q * (x - r)**2) + c @ x``."""

    q: np.ndarray
    r: np.ndarray

    def validate(self) -> None:
        super().validate()
        if self.maximize:
            raise SpecError("quadratic programs are minimized")
        if len(self.q) != self.num_vars or len(self.r) != self.num_vars:
            raise SpecError("quadratic weights/reference length mismatch")
        if np.any(self.q < 0):
            raise SpecError("quadratic weights must be nonnegative")


@dataclass(kw_only=True)
class IntegerProgram(LinearProgram):
    """All variables binary."""

    def validate(self) -> None:
        super().validate()
        if np.any(self.lb < 0) or np.any(self.ub > 1):
            raise SpecError("binary variables need bounds within [0, 1]")


@dataclass
class SolveResult:
    status: Status
    objective: float = math.nan
    x: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class ProgramBuilder:
    """Incremental construction of sparse rows over named variables."""

    names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    rows: list[dict[int, float]] = field(default_factory=list)
    senses: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)

    def var(self, name: str, lb: float = 0.0, ub: float = math.inf, cost: float = 0.0) -> int:
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.cost.append(cost)
        return len(self.names) - 1

    def add(self, coeffs: Mapping[int, float], sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise SpecError(f"unknown sense {sense!r}")
        self.rows.append(dict(coeffs))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def _arrays(self):
        n = len(self.names)
        A = np.zeros((len(self.rows), n))
        for i, row in enumerate(self.rows):
            for j, a in row.items():
                A[i, j] += a
        return dict(
            c=np.array(self.cost, dtype=float), A=A, senses=tuple(self.senses),
            b=np.array(self.rhs, dtype=float), lb=np.array(self.lb, dtype=float),
            ub=np.array(self.ub, dtype=float), names=tuple(self.names),
        )

    def lp(self, maximize: bool = False) -> LinearProgram:
        return LinearProgram(maximize=maximize, **self._arrays())

    def ip(self, maximize: bool = False) -> IntegerProgram:
        return IntegerProgram(maximize=maximize, **self._arrays())

    def qp(self, q: Sequence[float], r: Sequence[float]) -> QuadraticProgram:
        return QuadraticProgram(q=np.asarray(q, float), r=np.asarray(r, float), **self._arrays())


# -- independent checks -------------------------------------------------------

def residuals(prog: LinearProgram, x: np.ndarray) -> np.ndarray:
    """Violation of each row then each bound at ``x`` (0 when satisfied)."""
    ax = prog.A @ x if prog.A.size else np.zeros(len(prog.b))
    viol = np.zeros(len(prog.b))
    for i, s in enumerate(prog.senses):
        d = ax[i] - prog.b[i]
        viol[i] = max(d, 0.0) if s == "<=" else max(-d, 0.0) if s == ">=" else abs(d)
    vb = np.concatenate([np.maximum(prog.lb - x, 0.0), np.maximum(x - prog.ub, 0.0)])
    return np.concatenate([viol, np.nan_to_num(vb, nan=0.0)])


def kkt_residual(qp: QuadraticProgram, x: np.ndarray, active_tol: float = 1e-7) -> float:
    """Distance of the objective gradient from the cone of active constraint normals."""
    grad = 2.0 * qp.q * (x - qp.r) + qp.c
    normals = []
    ax = qp.A @ x if qp.A.size else np.zeros(0)
    for i, s in enumerate(qp.senses):
        if abs(ax[i] - qp.b[i]) > active_tol * max(1.0, abs(qp.b[i])):
            continue
        if s in (">=", "="):
            normals.append(qp.A[i])
        if s in ("<=", "="):
            normals.append(-qp.A[i])
    n = qp.num_vars
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        if math.isfinite(qp.lb[k]) and abs(x[k] - qp.lb[k]) <= active_tol * max(1.0, abs(qp.lb[k])):
            normals.append(e)
        if math.isfinite(qp.ub[k]) and abs(x[k] - qp.ub[k]) <= active_tol * max(1.0, abs(qp.ub[k])):
            normals.append(-e)
    if not normals:
        return float(np.linalg.norm(grad))
    _, res = nnls(np.array(normals).T, grad)
    return float(res)


def _check_feasible(prog: LinearProgram, x: np.ndarray, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(prog.b), initial=0.0)))
    worst = float(np.max(residuals(prog, x), initial=0.0))
    if worst > EPS * scale:
        raise SolverError(f"{what}: solution violates the program by {worst:.3g}")


# -- LP-format dump -----------------------------------------------------------

_dump_lock = threading.Lock()
_dump = {"dir": None, "count": 0}


def set_lp_dump_dir(path: Optional[str | Path]) -> None:
    """Write every subsequent program to ``path`` in CPLEX LP format (None disables)."""
    with _dump_lock:
        _dump["dir"] = Path(path) if path else None
        _dump["count"] = 0
        if _dump["dir"] is not None:
            _dump["dir"].mkdir(parents=True, exist_ok=True)


def _lp_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.]", "_", name)


def _terms(coeffs, names) -> str:
    parts = [f"{'-' if a < 0 else '+'} {abs(a):.17g} {names[j]}" for j, a in coeffs if a != 0.0]
    return " ".join(parts) if parts else "0 " + names[0] if names else "0"


def write_lp(prog: LinearProgram, path: str | Path) -> None:
    names = [_lp_name(s) for s in (prog.names or [f"x{j}" for j in range(prog.num_vars)])]
    out = [f"\\ {type(prog).__name__}"]
    out.append("Maximize" if prog.maximize else "Minimize")
    c = prog.c.copy()
    quad = ""
    if isinstance(prog, QuadraticProgram):
        c = c - 2.0 * prog.q * prog.r
        qt = [f"+ {2.0 * q:.17g} {names[j]} ^ 2" for j, q in enumerate(prog.q) if q != 0.0]
        if qt:
            quad = " + [ " + " ".join(qt) + " ] / 2"
        out.insert(1, f"\\ objective constant {float(np.sum(prog.q * prog.r ** 2)):.17g} omitted")
    out.append(" obj: " + _terms(enumerate(c), names) + quad)
    out.append("Subject To")
    sym = {"<=": "<=", ">=": ">=", "=": "="}
    for i, s in enumerate(prog.senses):
        out.append(f" c{i}: {_terms(enumerate(prog.A[i]), names)} {sym[s]} {prog.b[i]:.17g}")
    out.append("Bounds")
    for j, nm in enumerate(names):
        lo, hi = prog.lb[j], prog.ub[j]
        if not math.isfinite(lo) and not math.isfinite(hi):
            out.append(f" {nm} free")
        else:
            lo_s = f"{lo:.17g}" if math.isfinite(lo) else "-inf"
            hi_s = f"{hi:.17g}" if math.isfinite(hi) else "+inf"
            out.append(f" {lo_s} <= {nm} <= {hi_s}")
    if isinstance(prog, IntegerProgram):
        out.append("Binaries")
        out.append(" " + " ".join(names))
    out.append("End")
    Path(path).write_text("\n".join(out) + "\n")


def _maybe_dump(prog: LinearProgram, kind: str) -> None:
    with _dump_lock:
        if _dump["dir"] is None:
            return
        _dump["count"] += 1
        path = _dump["dir"] / f"{kind}_{_dump['count']:06d}.lp"
    write_lp(prog, path)


# -- LP -----------------------------------------------------------------------

def _split_rows(prog: LinearProgram):
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for i, s in enumerate(prog.senses):
        if s == "<=":
            ub_rows.append(prog.A[i])
            ub_rhs.append(prog.b[i])
        elif s == ">=":
            ub_rows.append(-prog.A[i])
            ub_rhs.append(-prog.b[i])
        else:
            eq_rows.append(prog.A[i])
            eq_rhs.append(prog.b[i])
    n = prog.num_vars
    A_ub = np.array(ub_rows).reshape(-1, n) if ub_rows else None
    A_eq = np.array(eq_rows).reshape(-1, n) if eq_rows else None
    return A_ub, (np.array(ub_rhs) if ub_rows else None), A_eq, (np.array(eq_rhs) if eq_rows else None)


def solve_lp(prog: LinearProgram) -> SolveResult:
    prog.validate()
    _maybe_dump(prog, "lp")
    if prog.num_vars == 0:
        return _solve_empty(prog)
    A_ub, b_ub, A_eq, b_eq = _split_rows(prog)
    cost = -prog.c if prog.maximize else prog.c
    bounds = [(None if not math.isfinite(l) else l, None if not math.isfinite(u) else u)
              for l, u in zip(prog.lb, prog.ub)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        return SolveResult(Status.INFEASIBLE)
    if res.status == 3:
        return SolveResult(Status.UNBOUNDED)
    if res.status != 0:
        raise SolverError(f"LP backend: {res.message}")
    x = np.asarray(res.x, float)
    _check_feasible(prog, x, "LP")
    return SolveResult(Status.OPTIMAL, float(prog.c @ x), x)


def _solve_empty(prog: LinearProgram) -> SolveResult:
    x = np.zeros(0)
    if np.any(residuals(prog, x) > EPS):
        return SolveResult(Status.INFEASIBLE)
    return SolveResult(Status.OPTIMAL, 0.0, x)


# -- QP -----------------------------------------------------------------------

def solve_qp(prog: QuadraticProgram) -> SolveResult:
    prog.validate()
    _maybe_dump(prog, "qp")
    if prog.num_vars == 0:
        return _solve_empty(prog)
    if np.all(prog.q > 0):
        res = _solve_qp_quadprog(prog)
    else:
        res = _solve_qp_cvxpy(prog)
    if res.optimal:
        _check_feasible(prog, res.x, "QP")
        kkt = kkt_residual(prog, res.x)
        grad_scale = max(1.0, float(np.linalg.norm(2.0 * prog.q * (res.x - prog.r) + prog.c)))
        if kkt > EPS * grad_scale:
            raise SolverError(f"QP: KKT residual {kkt:.3g} exceeds tolerance")
    return res


def _qp_objective(prog: QuadraticProgram, x: np.ndarray) -> float:
    return float(np.sum(prog.q * (x - prog.r) ** 2) + prog.c @ x)


def _solve_qp_quadprog(prog: QuadraticProgram) -> SolveResult:
    import quadprog

    n = prog.num_vars
    G = np.diag(2.0 * prog.q)
    a = 2.0 * prog.q * prog.r - prog.c
    eq, ineq, eq_b, ineq_b = [], [], [], []
    for i, s in enumerate(prog.senses):
        if s == "=":
            eq.append(prog.A[i])
            eq_b.append(prog.b[i])
        elif s == ">=":
            ineq.append(prog.A[i])
            ineq_b.append(prog.b[i])
        else:
            ineq.append(-prog.A[i])
            ineq_b.append(-prog.b[i])
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        if math.isfinite(prog.lb[k]):
            ineq.append(e)
            ineq_b.append(prog.lb[k])
        if math.isfinite(prog.ub[k]):
            ineq.append(-e)
            ineq_b.append(-prog.ub[k])
    rows = eq + ineq
    if not rows:
        x = prog.r - prog.c / (2.0 * prog.q)
        return SolveResult(Status.OPTIMAL, _qp_objective(prog, x), x)
    C = np.array(rows).T
    bvec = np.array(eq_b + ineq_b, dtype=float)
    try:
        x = quadprog.solve_qp(G, a, C, bvec, len(eq))[0]
    except ValueError as exc:
        if "inconsistent" in str(exc):
            return SolveResult(Status.INFEASIBLE)
        raise SolverError(f"QP backend: {exc}") from exc
    x = np.asarray(x, float)
    return SolveResult(Status.OPTIMAL, _qp_objective(prog, x), x)


def _solve_qp_cvxpy(prog: QuadraticProgram) -> SolveResult:
    try:
        import cvxpy as cp
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise SolverError("semidefinite QP needs the optional cvxpy dependency") from exc
    n = prog.num_vars
    x = cp.Variable(n)
    cons = []
    for i, s in enumerate(prog.senses):
        expr = prog.A[i] @ x
        cons.append(expr <= prog.b[i] if s == "<=" else expr >= prog.b[i] if s == ">=" else expr == prog.b[i])
    fin_lb = np.isfinite(prog.lb)
    fin_ub = np.isfinite(prog.ub)
    if fin_lb.any():
        cons.append(x[fin_lb] >= prog.lb[fin_lb])
    if fin_ub.any():
        cons.append(x[fin_ub] <= prog.ub[fin_ub])
    obj = cp.Minimize(cp.sum(cp.multiply(prog.q, cp.square(x - prog.r))) + prog.c @ x)
    problem = cp.Problem(obj, cons)
    problem.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    if problem.status in ("infeasible", "infeasible_inaccurate"):
        return SolveResult(Status.INFEASIBLE)
    if problem.status in ("unbounded", "unbounded_inaccurate"):
        return SolveResult(Status.UNBOUNDED)
    if problem.status != "optimal":
        raise SolverError(f"QP backend: {problem.status}")
    xv = np.asarray(x.value, float)
    return SolveResult(Status.OPTIMAL, _qp_objective(prog, xv), xv)


# -- IP -----------------------------------------------------------------------

_TIE_TOL = EPS / 10


def _milp(cost, A, lo, hi, lb, ub):
    cons = LinearConstraint(A, lo, hi) if A.shape[0] else None
    return milp(
        cost, constraints=cons, integrality=np.ones(len(cost)), bounds=Bounds(lb, ub),
        options={"mip_rel_gap": 0.0},
    )


def _row_bounds(prog: LinearProgram):
    lo = np.full(len(prog.b), -np.inf)
    hi = np.full(len(prog.b), np.inf)
    for i, s in enumerate(prog.senses):
        if s in (">=", "="):
            lo[i] = prog.b[i]
        if s in ("<=", "="):
            hi[i] = prog.b[i]
    return lo, hi


def solve_ip(prog: IntegerProgram, tie_break: bool = True) -> SolveResult:
    """Exact 0/1 optimum; among optimal (within EPS/10) solutions returns the
    lexicographically smallest assignment in variable order."""
    prog.validate()
    _maybe_dump(prog, "ip")
    n = prog.num_vars
    if n == 0:
        return _solve_empty(prog)
    sign = -1.0 if prog.maximize else 1.0
    lo, hi = _row_bounds(prog)
    A = prog.A.reshape(-1, n)
    res = _milp(sign * prog.c, A, lo, hi, prog.lb, prog.ub)
    if res.status == 2:
        return SolveResult(Status.INFEASIBLE)
    if res.status == 3:
        return SolveResult(Status.UNBOUNDED)
    if res.status != 0 or res.x is None:
        raise SolverError(f"IP backend: {res.message}")
    x = np.round(res.x)
    _check_feasible(prog, x, "IP")
    if tie_break:
        x = _lex_smallest(prog, x, sign, A, lo, hi)
    return SolveResult(Status.OPTIMAL, float(prog.c @ x), x)


def _lex_smallest(prog, x, sign, A, lo, hi):
    best = sign * float(prog.c @ x)
    A2 = np.vstack([A, sign * prog.c])
    lo2 = np.append(lo, -np.inf)
    hi2 = np.append(hi, best + _TIE_TOL)
    lb, ub = prog.lb.copy(), prog.ub.copy()
    for k in range(prog.num_vars):
        if x[k] < 0.5:
            ub[k] = 0.0
            continue
        if lb[k] >= 0.5:
            continue
        trial = ub.copy()
        trial[k] = 0.0
        res = _milp(sign * prog.c, A2, lo2, hi2, lb, trial)
        if res.status == 0 and res.x is not None:
            cand = np.round(res.x)
            if (np.max(residuals(prog, cand), initial=0.0) <= EPS
                    and sign * float(prog.c @ cand) <= best + _TIE_TOL):
                x, ub = cand, trial
                best = min(best, sign * float(prog.c @ cand))
                hi2[-1] = best + _TIE_TOL
                continue
        lb[k] = 1.0
    return x


def enumerate_ip(prog: IntegerProgram) -> SolveResult:
    """Brute-force reference solver for tiny programs (same tie-break rule)."""
    prog.validate()
    n = prog.num_vars
    if n > 22:
        raise SpecError("enumeration limited to 22 binary variables")
    sign = -1.0 if prog.maximize else 1.0
    best, best_x = math.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=n):
        x = np.array(bits)
        if np.max(residuals(prog, x), initial=0.0) > EPS:
            continue
        val = sign * float(prog.c @ x)
        if val < best - _TIE_TOL:
            best, best_x = val, x
    if best_x is None:
        return SolveResult(Status.INFEASIBLE)
    return SolveResult(Status.OPTIMAL, float(prog.c @ best_x), best_x)
